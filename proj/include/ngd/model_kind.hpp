#pragma once

#include <string>

#include "ngd/errors.hpp"

namespace ngd {

enum class ModelKind { linear, logistic, poisson };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    case ModelKind::poisson: return "poisson";
  }
  throw InvalidArgumentError("unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "logistic") return ModelKind::logistic;
  if (s == "poisson") return ModelKind::poisson;
  throw InvalidArgumentError("unknown model kind: '" + s + "'");
}

}  // namespace ngd
