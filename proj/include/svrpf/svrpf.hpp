// Copyright 2026 The svrpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVRPF_SVRPF_HPP
#define SVRPF_SVRPF_HPP

// Umbrella header.

#include <svrpf/config.hpp>
#include <svrpf/consistency.hpp>
#include <svrpf/filters.hpp>
#include <svrpf/gaussian.hpp>
#include <svrpf/harness.hpp>
#include <svrpf/kalman.hpp>
#include <svrpf/metrics.hpp>
#include <svrpf/model.hpp>
#include <svrpf/proposals.hpp>
#include <svrpf/quadprog.hpp>
#include <svrpf/region.hpp>
#include <svrpf/resampling.hpp>
#include <svrpf/rng.hpp>
#include <svrpf/svr_density.hpp>
#include <svrpf/types.hpp>
#include <svrpf/validate.hpp>
#include <svrpf/weights.hpp>

#endif
