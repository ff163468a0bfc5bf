#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selbias {

/// Raised when a configuration or input violates a documented precondition.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a fitting or estimation routine cannot produce a result.
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One unit of the population. `y0`/`y1` are oracle fields that only a
/// simulator knows; estimators read `x`, `t` and `y`.
struct Sample {
  double x = 0.0;
  int t = 0;
  double y0 = 0.0;
  double y1 = 0.0;
  double y = 0.0;
  bool selected = true;

  /// Consistency: the factual outcome is the potential outcome of the arm
  /// actually received.
  [[nodiscard]] bool consistent() const {
    return (t == 0 || t == 1) && y == (t == 1 ? y1 : y0);
  }
};

/// Immutable-after-construction collection of samples sharing one generation
/// config. Filtering returns a new dataset; the parent is never touched.
class Dataset {
public:
  Dataset() = default;
  Dataset(std::vector<Sample> samples, std::uint64_t seed,
          std::map<std::string, std::string> meta = {});

  [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] bool empty() const { return samples_.empty(); }
  [[nodiscard]] const Sample& operator[](std::size_t i) const { return samples_[i]; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::map<std::string, std::string>& meta() const { return meta_; }

  [[nodiscard]] Dataset filter(const std::function<bool(const Sample&)>& keep) const;
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Dataset with_meta(const std::string& key, const std::string& value) const;

  [[nodiscard]] std::vector<double> xs() const;
  [[nodiscard]] std::vector<double> ys() const;
  [[nodiscard]] std::vector<int> ts() const;
  [[nodiscard]] std::size_t count_arm(int arm) const;

private:
  std::vector<Sample> samples_;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> meta_;
};

enum class Method { IPW, Polynomial, MLE, MLE_Beta, SM, SM_Beta, Heckman, AIPW, AIPW_Oracle };

/// Stable CLI names: ipw, poly, mle, mle_beta, sm, sm_beta, heckman, aipw, aipw_oracle.
std::string_view method_name(Method m);
Method parse_method(std::string_view name);
const std::vector<Method>& all_methods();

struct AteEstimate {
  Method method = Method::IPW;
  double value = 0.0;
  std::size_t n_used = 0;
  std::map<std::string, double> diagnostics;
};

}  // namespace selbias
