// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header for the whole library.

#pragma once

#include "dmha/augment.hpp"
#include "dmha/config.hpp"
#include "dmha/dataset.hpp"
#include "dmha/features.hpp"
#include "dmha/fft.hpp"
#include "dmha/gradcheck.hpp"
#include "dmha/io.hpp"
#include "dmha/metrics.hpp"
#include "dmha/model.hpp"
#include "dmha/optim.hpp"
#include "dmha/postprocess.hpp"
#include "dmha/rng.hpp"
#include "dmha/tensor.hpp"
#include "dmha/train.hpp"
