#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bitecast/errors.hpp"

namespace bitecast {

enum class LossKind { ZeroOne, NLL, LS };
enum class LinkKind { Sigmoid, Step };
enum class MixScheme { Voting, ParameterMixing };

// Probability clamp applied inside the NLL loss and the matching log-mean
// table integrand; keeps every table cell and estimate finite.
inline constexpr double kProbClamp = 1e-12;

struct LabeledDataset {
  std::vector<double> features;  // n x d, row-major
  std::vector<int> labels;       // each 0 or 1
  std::size_t n = 0;
  std::size_t d = 0;

  std::span<const double> point(std::size_t i) const {
    return {features.data() + i * d, d};
  }
  void validate() const;
};

// Numerically stable sigmoid; shared with the hot table-building loops.
inline double sigmoid(double c) {
  if (c >= 0.0) return 1.0 / (1.0 + std::exp(-c));
  const double e = std::exp(c);
  return e / (1.0 + e);
}

// Maps a raw classifier score to a positive-class probability.
// Step sends c = 0 to 0, matching the 0/1 tie rule below through s(0) = 0.5.
double link(LinkKind kind, double c);

// Pointwise loss between the observed label and a positive-class probability.
//   ZeroOne: prediction is 1 iff p > 0.5 (a tie predicts class 0)
//   NLL:     -log p_y with p clamped to [1e-12, 1 - 1e-12]
//   LS:      2 (y - p)^2, the squared distance between the class vectors
// All kinds satisfy eval_loss(kind, y, p) == eval_loss(kind, 1-y, 1-p).
double eval_loss(LossKind kind, int y, double p_plus);

const char* to_string(LossKind kind);
const char* to_string(LinkKind kind);
const char* to_string(MixScheme mix);
LossKind parse_loss(std::string_view text);
LinkKind parse_link(std::string_view text);
MixScheme parse_mix(std::string_view text);

}  // namespace bitecast
