#pragma once

// Estimation of sparse linear cyclic structural equation models from
// interventional Gaussian data: moment-based (LLC) and two-step penalized
// maximum-likelihood estimators, intervention-system design, identifiability
// diagnostics, and a reproducible benchmark harness.

#include "lcsem/admm.hpp"
#include "lcsem/alm.hpp"
#include "lcsem/bench.hpp"
#include "lcsem/chol_update.hpp"
#include "lcsem/common.hpp"
#include "lcsem/design.hpp"
#include "lcsem/diagnostics.hpp"
#include "lcsem/graphs.hpp"
#include "lcsem/io.hpp"
#include "lcsem/lasso.hpp"
#include "lcsem/lbfgs.hpp"
#include "lcsem/likelihood.hpp"
#include "lcsem/llc.hpp"
#include "lcsem/model.hpp"
#include "lcsem/quic.hpp"
#include "lcsem/rng.hpp"
