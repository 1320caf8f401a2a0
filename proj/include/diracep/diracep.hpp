// Copyright 2026 The diracep Authors
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

#pragma once

// Core library. The command-line layer (diracep/cli.hpp) additionally needs
// the vendored CLI11 and nlohmann/json headers.

#include "diracep/types.hpp"
#include "diracep/errors.hpp"
#include "diracep/numerics.hpp"
#include "diracep/parallel.hpp"
#include "diracep/model.hpp"
#include "diracep/ep_atlas.hpp"
#include "diracep/dilation.hpp"
#include "diracep/pulse_synth.hpp"
#include "diracep/readout.hpp"
#include "diracep/experiments.hpp"
