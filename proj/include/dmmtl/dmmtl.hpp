/*
 * Copyright 2026 The DMMTL Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Umbrella header.

#include "dmmtl/baselines.hpp"
#include "dmmtl/checkpoint.hpp"
#include "dmmtl/config.hpp"
#include "dmmtl/csv_io.hpp"
#include "dmmtl/data.hpp"
#include "dmmtl/diagnostics.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/gradients.hpp"
#include "dmmtl/losses.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/optimizer.hpp"
#include "dmmtl/rng.hpp"
#include "dmmtl/tensor.hpp"
