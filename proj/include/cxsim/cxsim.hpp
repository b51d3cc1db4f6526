#pragma once

#include "cxsim/baselines.hpp"
#include "cxsim/cx.hpp"
#include "cxsim/experiments.hpp"
#include "cxsim/features.hpp"
#include "cxsim/grad.hpp"
#include "cxsim/optimize.hpp"
#include "cxsim/parallel.hpp"
#include "cxsim/png_io.hpp"
#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

