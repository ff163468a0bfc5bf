#include "selbias/core.hpp"

#include <array>
#include <utility>

namespace selbias {

Dataset::Dataset(std::vector<Sample> samples, std::uint64_t seed,
                 std::map<std::string, std::string> meta)
    : samples_(std::move(samples)), seed_(seed), meta_(std::move(meta)) {
  for (const auto& s : samples_) {
    if (s.t != 0 && s.t != 1) throw ConfigError("sample treatment must be 0 or 1");
  }
}

Dataset Dataset::filter(const std::function<bool(const Sample&)>& keep) const {
  std::vector<Sample> kept;
  kept.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (keep(s)) kept.push_back(s);
  }
  return Dataset(std::move(kept), seed_, meta_);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Sample> kept;
  kept.reserve(indices.size());
  for (auto i : indices) kept.push_back(samples_.at(i));
  return Dataset(std::move(kept), seed_, meta_);
}

Dataset Dataset::with_meta(const std::string& key, const std::string& value) const {
  auto meta = meta_;
  meta[key] = value;
  return Dataset(samples_, seed_, std::move(meta));
}

std::vector<double> Dataset::xs() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.x);
  return out;
}

std::vector<double> Dataset::ys() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.y);
  return out;
}

std::vector<int> Dataset::ts() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.t);
  return out;
}

std::size_t Dataset::count_arm(int arm) const {
  std::size_t n = 0;
  for (const auto& s : samples_) n += (s.t == arm);
  return n;
}

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 9> kMethodNames{{
    {Method::IPW, "ipw"},
    {Method::Polynomial, "poly"},
    {Method::MLE, "mle"},
    {Method::MLE_Beta, "mle_beta"},
    {Method::SM, "sm"},
    {Method::SM_Beta, "sm_beta"},
    {Method::Heckman, "heckman"},
    {Method::AIPW, "aipw"},
    {Method::AIPW_Oracle, "aipw_oracle"},
}};

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [method, n] : kMethodNames) {
    if (n == name) return method;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& [method, name] : kMethodNames) out.push_back(method);
    return out;
  }();
  return methods;
}

}  // namespace selbias
