#pragma once

#include "dualglass/types.hpp"
#include "dualglass/cloud.hpp"
#include "dualglass/plane.hpp"
#include "dualglass/pose.hpp"
#include "dualglass/ransac.hpp"
#include "dualglass/detect.hpp"
#include "dualglass/boundary.hpp"
#include "dualglass/classify.hpp"
#include "dualglass/sim.hpp"
#include "dualglass/config.hpp"
#include "dualglass/scene_io.hpp"
#include "dualglass/drpc.hpp"
#include "dualglass/io.hpp"
#include "dualglass/registry.hpp"
#include "dualglass/eval.hpp"
#include "dualglass/pipeline.hpp"
