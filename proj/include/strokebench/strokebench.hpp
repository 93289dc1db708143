#pragma once

#include "strokebench/annotations.hpp"
#include "strokebench/commands.hpp"
#include "strokebench/config.hpp"
#include "strokebench/conv3d.hpp"
#include "strokebench/dense.hpp"
#include "strokebench/error.hpp"
#include "strokebench/frames.hpp"
#include "strokebench/gradcheck.hpp"
#include "strokebench/io.hpp"
#include "strokebench/layer_spec.hpp"
#include "strokebench/layers.hpp"
#include "strokebench/loss.hpp"
#include "strokebench/metrics.hpp"
#include "strokebench/model.hpp"
#include "strokebench/optimizer.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/pooling.hpp"
#include "strokebench/rng.hpp"
#include "strokebench/synth.hpp"
#include "strokebench/taxonomy.hpp"
#include "strokebench/tensor.hpp"
#include "strokebench/training.hpp"
