#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace selbias {

enum class Role { Treatment, Outcome, Covariate, Selection };

std::string_view role_name(Role r);

/// Directed acyclic graph with optional role tags. Acyclicity is enforced on
/// every edge insertion.
class Dag {
public:
  using NodeSet = std::set<std::string>;

  std::size_t add_node(const std::string& name);
  /// Throws on an edge that would close a cycle.
  void add_edge(const std::string& from, const std::string& to);
  void set_role(const std::string& node, Role role);

  [[nodiscard]] bool has_node(const std::string& name) const { return index_.count(name) > 0; }
  [[nodiscard]] bool has_edge(const std::string& from, const std::string& to) const;
  [[nodiscard]] const std::vector<std::string>& nodes() const { return names_; }
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> edges() const;
  [[nodiscard]] const std::map<std::string, Role>& roles() const { return roles_; }
  [[nodiscard]] std::vector<std::string> with_role(Role r) const;
  /// The single node carrying `r`; throws when absent or repeated.
  [[nodiscard]] std::string unique_role(Role r) const;

  [[nodiscard]] NodeSet parents(const std::string& n) const;
  [[nodiscard]] NodeSet children(const std::string& n) const;
  /// Ancestors including the nodes themselves.
  [[nodiscard]] NodeSet ancestors(const NodeSet& of) const;
  /// Descendants including the nodes themselves.
  [[nodiscard]] NodeSet descendants(const NodeSet& of) const;
  [[nodiscard]] bool reaches(const std::string& from, const std::string& to) const;

private:
  [[nodiscard]] std::size_t id(const std::string& name) const;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::set<std::size_t>> out_, in_;
  std::map<std::string, Role> roles_;
};

/// Lines: "A -> B", "role A = treatment|outcome|covariate|selection", "# ...".
Dag parse_dag(std::string_view text);

/// Reachability (Bayes-ball) test of A independent of B given Z.
bool d_separated(const Dag& dag, const Dag::NodeSet& a, const Dag::NodeSet& b, const Dag::NodeSet& z);
/// An active path from A to B given Z, if any.
std::optional<std::vector<std::string>> active_path(const Dag& dag, const Dag::NodeSet& a, const Dag::NodeSet& b,
                                                    const Dag::NodeSet& z);

Dag mutilate(const Dag& dag, const Dag::NodeSet& remove_incoming, const Dag::NodeSet& remove_outgoing);

enum class Criterion { SelectionBackdoor, SelectionBackdoorExt, GACT, GACTExt, SId };

std::string_view criterion_name(Criterion c);
Criterion parse_criterion(std::string_view name);

struct CriterionReport {
  Criterion criterion = Criterion::SelectionBackdoor;
  bool holds = false;
  std::optional<std::string> failed_clause;
  std::optional<std::vector<std::string>> witness_path;
};

CriterionReport check_criterion(const Dag& dag, Criterion criterion, const Dag::NodeSet& z);

enum class DagVerdict { No, Yes, YesWithExternal };
std::string_view dag_verdict_name(DagVerdict v);

struct TemplateClassification {
  DagVerdict dag_framework = DagVerdict::No;
  bool s_id = false;
};

/// Four nodes tagged treatment, outcome, covariate and selection, with the
/// selection node a sink.
TemplateClassification classify_selection_template(const Dag& dag);

}  // namespace selbias
