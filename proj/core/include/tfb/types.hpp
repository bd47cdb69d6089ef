#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace tfb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Estimand { ATT, ATC, ATE };

std::string_view to_string(Estimand e);
Estimand parse_estimand(std::string_view s);

// Error taxonomy. The CLI maps these onto exit codes 1 / 2 / 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view kind() const noexcept = 0;
};

class UsageError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "usage"; }
};

class DataError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "data"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "numerical"; }
};

/// Control and treated weight vectors. The group an estimand does not
/// weight carries ones and is ignored by estimand-specific formulas.
struct GroupWeights {
  Vector control;
  Vector treated;
};

}  // namespace tfb
