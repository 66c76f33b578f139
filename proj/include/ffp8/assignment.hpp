// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_ASSIGNMENT_HPP
#define FFP8_ASSIGNMENT_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ffp8/format.hpp"

namespace ffp8 {

/// Formats of one dense layer: its weight matrix, and the activation that
/// feeds it (the network input for the first layer, the previous layer's
/// ReLU output otherwise).
struct LayerFormats {
  std::string layer;
  Format weight;
  Format activation;

  friend bool operator==(const LayerFormats&, const LayerFormats&) = default;
};

struct Assignment {
  std::vector<LayerFormats> layers;
  std::optional<Format> global_weight;
  std::optional<Format> global_activation;

  const LayerFormats* find(std::string_view layer) const {
    auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerFormats& l) { return l.layer == layer; });
    return it == layers.end() ? nullptr : &*it;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

}  // namespace ffp8

#endif  // FFP8_ASSIGNMENT_HPP
