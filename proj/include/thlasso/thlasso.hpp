#pragma once

#include "thlasso/diagnostics.hpp"
#include "thlasso/environment.hpp"
#include "thlasso/error.hpp"
#include "thlasso/estimator.hpp"
#include "thlasso/policies.hpp"
#include "thlasso/random.hpp"
#include "thlasso/sparse_linear.hpp"
#include "thlasso/types.hpp"
