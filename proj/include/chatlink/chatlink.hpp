// Copyright 2026 The Chatlink Authors
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

// Everything except the HTTP service (service.hpp pulls in cpp-httplib).

#include "chatlink/config.hpp"
#include "chatlink/corpus.hpp"
#include "chatlink/error.hpp"
#include "chatlink/eval.hpp"
#include "chatlink/features.hpp"
#include "chatlink/lda.hpp"
#include "chatlink/model.hpp"
#include "chatlink/optim.hpp"
#include "chatlink/rng.hpp"
#include "chatlink/synth.hpp"
#include "chatlink/train.hpp"
