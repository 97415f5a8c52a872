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

// Fits link-model coefficients by minimizing the regularized NLL with L-BFGS
// from theta = 0.

#include <span>
#include <vector>

#include "chatlink/model.hpp"
#include "chatlink/optim.hpp"

namespace chatlink {

// Chats must carry features; `phi` is empty in base mode and holds one entry
// per chat otherwise.
inline LinkObjective make_objective(const ParamIndexer& ix, const std::vector<Chat>& chats,
                                    const std::vector<ChatGold>& gold, const TrainConfig& cfg,
                                    const std::vector<std::vector<TopicDist>>& phi = {}) {
  if (ix.has_cross() && phi.size() != chats.size())
    throw ValidationError("missing topic distributions for lda mode");
  std::vector<EncodedChat> enc;
  enc.reserve(chats.size());
  for (std::size_t c = 0; c < chats.size(); ++c)
    enc.push_back(encode_chat(chats[c], ix,
                              ix.has_cross() ? std::span<const TopicDist>(phi[c])
                                             : std::span<const TopicDist>{}));
  return LinkObjective(std::move(enc), gold, ix.dimension(), cfg.lambda, cfg.threads);
}

struct TrainResult {
  Parameters params;
  OptimReport report;
};

inline TrainResult train(const ParamIndexer& ix, const std::vector<Chat>& chats,
                         const std::vector<ChatGold>& gold, const TrainConfig& cfg,
                         const OptimConfig& opt = {},
                         const std::vector<std::vector<TopicDist>>& phi = {}) {
  auto objective = make_objective(ix, chats, gold, cfg, phi);
  auto res = minimize(objective, std::vector<double>(ix.dimension(), 0.0), opt);
  return {Parameters(ix, std::move(res.x)), std::move(res.report)};
}

}  // namespace chatlink
