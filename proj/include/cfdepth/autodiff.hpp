#pragma once

#include "cfdepth/autodiff/ops.hpp"
#include "cfdepth/autodiff/optim.hpp"
#include "cfdepth/autodiff/tensor.hpp"
