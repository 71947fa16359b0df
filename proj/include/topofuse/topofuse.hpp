#pragma once

// Umbrella header.

#include "topofuse/artifacts.hpp"
#include "topofuse/error.hpp"
#include "topofuse/fusion.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/histogram.hpp"
#include "topofuse/parallel.hpp"
#include "topofuse/pathfind.hpp"
#include "topofuse/pipeline.hpp"
#include "topofuse/projection.hpp"
#include "topofuse/service.hpp"
#include "topofuse/spline.hpp"
#include "topofuse/synth.hpp"
#include "topofuse/topology.hpp"
#include "topofuse/volio.hpp"
#include "topofuse/volume.hpp"
