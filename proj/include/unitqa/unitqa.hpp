// Copyright 2026 The UnitQA Authors.
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

// Umbrella header: pulls in the whole library.

#pragma once

#include "unitqa/beam.hpp"
#include "unitqa/checkpoint.hpp"
#include "unitqa/dataset.hpp"
#include "unitqa/errors.hpp"
#include "unitqa/kmeans.hpp"
#include "unitqa/metrics.hpp"
#include "unitqa/model.hpp"
#include "unitqa/optim.hpp"
#include "unitqa/pipeline.hpp"
#include "unitqa/rng.hpp"
#include "unitqa/robustness.hpp"
#include "unitqa/serial.hpp"
#include "unitqa/synth.hpp"
#include "unitqa/training.hpp"
#include "unitqa/unit_codec.hpp"
#include "unitqa/vocabulary.hpp"
