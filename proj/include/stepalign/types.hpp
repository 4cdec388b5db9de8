#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace stepalign {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using MatrixXf = Matrix<float>;
using VectorXf = Vector<float>;

using Index = Eigen::Index;

enum class Granularity { step, page };

/// Retrieval / matching direction: video clip to diagram, or diagram to video clip.
enum class Direction { V2I, I2V };

inline const char* to_string(Granularity g) { return g == Granularity::step ? "step" : "page"; }
Granularity parse_granularity(const std::string& s);

/// Failure categories map onto CLI exit codes (1 = validation, 2 = numerical).
enum class ErrorKind { validation, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::validation, what); }
[[noreturn]] inline void fail_numeric(const std::string& what) { throw Error(ErrorKind::numerical, what); }

}  // namespace stepalign
