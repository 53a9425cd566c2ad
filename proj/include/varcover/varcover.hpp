#pragma once

// Umbrella header.

#include "varcover/cover.hpp"
#include "varcover/estimators.hpp"
#include "varcover/hermite.hpp"
#include "varcover/learn_gmm.hpp"
#include "varcover/learn_hyperplane.hpp"
#include "varcover/learn_mlr.hpp"
#include "varcover/learn_relu.hpp"
#include "varcover/mixture_fit.hpp"
#include "varcover/moment_cover.hpp"
#include "varcover/multi_index.hpp"
#include "varcover/parallel.hpp"
#include "varcover/poly.hpp"
#include "varcover/rng.hpp"
#include "varcover/subspace.hpp"
#include "varcover/sym_tensor.hpp"
#include "varcover/synth.hpp"
