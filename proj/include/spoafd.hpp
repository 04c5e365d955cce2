#pragma once

#include "spoafd/candidates.hpp"
#include "spoafd/discretize.hpp"
#include "spoafd/errors.hpp"
#include "spoafd/experiment.hpp"
#include "spoafd/kernels.hpp"
#include "spoafd/lift.hpp"
#include "spoafd/poafd.hpp"
#include "spoafd/stochastic.hpp"
#include "spoafd/validate.hpp"
