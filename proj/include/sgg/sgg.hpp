#pragma once

#include "sgg/agcn.hpp"
#include "sgg/checkpoint.hpp"
#include "sgg/error.hpp"
#include "sgg/graph/box.hpp"
#include "sgg/graph/io.hpp"
#include "sgg/graph/scene_graph.hpp"
#include "sgg/metrics.hpp"
#include "sgg/numerics/gradcheck.hpp"
#include "sgg/numerics/matrix.hpp"
#include "sgg/numerics/mlp.hpp"
#include "sgg/numerics/params.hpp"
#include "sgg/numerics/tape.hpp"
#include "sgg/perturb.hpp"
#include "sgg/pipeline/model.hpp"
#include "sgg/pipeline/train.hpp"
#include "sgg/pipeline/world.hpp"
#include "sgg/repn.hpp"
#include "sgg/rng.hpp"
