#pragma once

#include "datk/ops_basic.hpp"
#include "datk/ops_loss.hpp"
#include "datk/ops_nn.hpp"
#include "datk/ops_sample.hpp"
