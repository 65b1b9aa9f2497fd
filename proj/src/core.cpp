#include "bitecast/core.hpp"

#include <algorithm>
#include <string>

namespace bitecast {

void LabeledDataset::validate() const {
  if (n == 0) throw InvalidInputError("dataset must contain at least one example");
  if (d == 0) throw InvalidInputError("dataset must have at least one feature");
  if (labels.size() != n || features.size() != n * d)
    throw InvalidInputError("dataset storage does not match the declared shape");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] != 0 && labels[i] != 1)
      throw InvalidInputError("dataset labels must be 0 or 1 (example " + std::to_string(i) + ")");
  for (double v : features)
    if (!std::isfinite(v)) throw InvalidInputError("dataset features must be finite");
}

double link(LinkKind kind, double c) {
  if (!std::isfinite(c)) throw InvalidInputError("link: score must be finite");
  switch (kind) {
    case LinkKind::Sigmoid:
      return sigmoid(c);
    case LinkKind::Step:
      return c > 0.0 ? 1.0 : 0.0;
  }
  throw InvalidInputError("link: unknown kind");
}

double eval_loss(LossKind kind, int y, double p_plus) {
  if (y != 0 && y != 1) throw InvalidInputError("eval_loss: label must be 0 or 1");
  if (!(p_plus >= 0.0 && p_plus <= 1.0))
    throw InvalidInputError("eval_loss: p_plus must lie in [0, 1]");
  switch (kind) {
    case LossKind::ZeroOne: {
      const int predicted = p_plus > 0.5 ? 1 : 0;
      return predicted == y ? 0.0 : 1.0;
    }
    case LossKind::NLL: {
      double p = y == 1 ? p_plus : 1.0 - p_plus;
      p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
      return -std::log(p);
    }
    case LossKind::LS: {
      const double diff = static_cast<double>(y) - p_plus;
      return 2.0 * diff * diff;
    }
  }
  throw InvalidInputError("eval_loss: unknown kind");
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ZeroOne: return "zero_one";
    case LossKind::NLL: return "nll";
    case LossKind::LS: return "ls";
  }
  return "?";
}

const char* to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::Sigmoid: return "sigmoid";
    case LinkKind::Step: return "step";
  }
  return "?";
}

const char* to_string(MixScheme mix) {
  switch (mix) {
    case MixScheme::Voting: return "voting";
    case MixScheme::ParameterMixing: return "pm";
  }
  return "?";
}

LossKind parse_loss(std::string_view text) {
  if (text == "zero_one" || text == "01" || text == "0/1") return LossKind::ZeroOne;
  if (text == "nll") return LossKind::NLL;
  if (text == "ls") return LossKind::LS;
  throw ParseError("unknown loss kind: '" + std::string(text) + "'");
}

LinkKind parse_link(std::string_view text) {
  if (text == "sigmoid") return LinkKind::Sigmoid;
  if (text == "step") return LinkKind::Step;
  throw ParseError("unknown link kind: '" + std::string(text) + "'");
}

MixScheme parse_mix(std::string_view text) {
  if (text == "voting") return MixScheme::Voting;
  if (text == "pm" || text == "parameter_mixing") return MixScheme::ParameterMixing;
  throw ParseError("unknown mixing scheme: '" + std::string(text) + "'");
}

}  // namespace bitecast
