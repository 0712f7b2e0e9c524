// Copyright 2026 The semtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header. The HTTP clients live in http_client.hpp and are not
// included here.

#pragma once

#include "chunker.hpp"
#include "compositions.hpp"
#include "llm_client.hpp"
#include "measurement.hpp"
#include "model_tree.hpp"
#include "numeric.hpp"
#include "prompts.hpp"
#include "scaling.hpp"
#include "semantic_tree.hpp"
#include "size_markov.hpp"
#include "surprisal.hpp"
#include "text.hpp"
#include "tree_ensemble.hpp"
