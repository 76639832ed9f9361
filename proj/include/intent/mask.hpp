#pragma once

#include <cstdint>
#include <string>

#include "intent/error.hpp"

namespace intent {

// On/off selection of the four input channels. At least one must be on.
struct FeatureMask {
  bool images = true;
  bool boxes = true;
  bool pose = true;
  bool speed = true;

  bool any() const { return images || boxes || pose || speed; }
  bool any_sequence() const { return boxes || pose || speed; }

  // width of one combined sequence token under this mask
  std::int64_t token_width(std::int64_t box_dim = 4, std::int64_t pose_dim = 36,
                           std::int64_t speed_dim = 1) const {
    return (boxes ? box_dim : 0) + (pose ? pose_dim : 0) + (speed ? speed_dim : 0);
  }

  // compact letters, e.g. "IBS" for images+boxes+speed
  std::string token() const {
    std::string s;
    if (images) s += 'I';
    if (boxes) s += 'B';
    if (pose) s += 'P';
    if (speed) s += 'S';
    return s;
  }

  bool operator==(const FeatureMask&) const = default;
};

inline FeatureMask parse_mask(const std::string& token) {
  FeatureMask m{false, false, false, false};
  for (char c : token) {
    switch (c) {
      case 'I': case 'i': m.images = true; break;
      case 'B': case 'b': m.boxes = true; break;
      case 'P': case 'p': m.pose = true; break;
      case 'S': case 's': m.speed = true; break;
      default: throw ConfigError(msg("mask token '", token, "': unknown channel letter '", c, "'"));
    }
  }
  if (!m.any()) throw ConfigError(msg("mask token '", token, "' enables no channel"));
  return m;
}

}  // namespace intent
