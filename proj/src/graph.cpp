#include "selbias/graph.hpp"

#include "selbias/core.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace selbias {

namespace {

constexpr std::pair<Role, std::string_view> kRoleNames[] = {
    {Role::Treatment, "treatment"},
    {Role::Outcome, "outcome"},
    {Role::Covariate, "covariate"},
    {Role::Selection, "selection"},
};

constexpr std::pair<Criterion, std::string_view> kCriterionNames[] = {
    {Criterion::SelectionBackdoor, "selection_backdoor"},
    {Criterion::SelectionBackdoorExt, "selection_backdoor_ext"},
    {Criterion::GACT, "gact"},
    {Criterion::GACTExt, "gact_ext"},
    {Criterion::SId, "s_id"},
};

}  // namespace

std::string_view role_name(Role r) {
  for (const auto& [e, n] : kRoleNames) {
    if (e == r) return n;
  }
  return "unknown";
}

std::string_view criterion_name(Criterion c) {
  for (const auto& [e, n] : kCriterionNames) {
    if (e == c) return n;
  }
  return "unknown";
}

Criterion parse_criterion(std::string_view name) {
  for (const auto& [e, n] : kCriterionNames) {
    if (n == name) return e;
  }
  throw ConfigError("unknown criterion '" + std::string(name) + "'");
}

std::string_view dag_verdict_name(DagVerdict v) {
  switch (v) {
    case DagVerdict::No:
      return "no";
    case DagVerdict::Yes:
      return "yes";
    case DagVerdict::YesWithExternal:
      return "yes_with_external";
  }
  return "unknown";
}

std::size_t Dag::add_node(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  names_.push_back(name);
  out_.emplace_back();
  in_.emplace_back();
  index_[name] = names_.size() - 1;
  return names_.size() - 1;
}

std::size_t Dag::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown node '" + name + "'");
  return it->second;
}

bool Dag::reaches(const std::string& from, const std::string& to) const {
  return descendants({from}).count(to) > 0;
}

void Dag::add_edge(const std::string& from, const std::string& to) {
  const std::size_t a = add_node(from);
  const std::size_t b = add_node(to);
  if (a == b || reaches(to, from)) throw ConfigError("edge " + from + " -> " + to + " creates a cycle");
  out_[a].insert(b);
  in_[b].insert(a);
}

void Dag::set_role(const std::string& node, Role role) {
  add_node(node);
  auto it = roles_.find(node);
  if (it != roles_.end()) {
    throw ConfigError("duplicate role for node '" + node + "'");
  }
  if (role != Role::Covariate) {
    for (const auto& [n, r] : roles_) {
      if (r == role) throw ConfigError("duplicate " + std::string(role_name(role)) + " role ('" + n + "' and '" + node + "')");
    }
  }
  roles_[node] = role;
}

bool Dag::has_edge(const std::string& from, const std::string& to) const {
  if (!has_node(from) || !has_node(to)) return false;
  return out_[id(from)].count(id(to)) > 0;
}

std::vector<std::pair<std::string, std::string>> Dag::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t a = 0; a < names_.size(); ++a) {
    for (std::size_t b : out_[a]) out.emplace_back(names_[a], names_[b]);
  }
  return out;
}

std::vector<std::string> Dag::with_role(Role r) const {
  std::vector<std::string> out;
  for (const auto& [n, role] : roles_) {
    if (role == r) out.push_back(n);
  }
  return out;
}

std::string Dag::unique_role(Role r) const {
  const auto nodes = with_role(r);
  if (nodes.empty()) throw ConfigError("graph has no " + std::string(role_name(r)) + " node");
  if (nodes.size() > 1) throw ConfigError("graph has several " + std::string(role_name(r)) + " nodes");
  return nodes.front();
}

Dag::NodeSet Dag::parents(const std::string& n) const {
  NodeSet out;
  for (std::size_t p : in_[id(n)]) out.insert(names_[p]);
  return out;
}

Dag::NodeSet Dag::children(const std::string& n) const {
  NodeSet out;
  for (std::size_t c : out_[id(n)]) out.insert(names_[c]);
  return out;
}

Dag::NodeSet Dag::ancestors(const NodeSet& of) const {
  std::vector<bool> seen(names_.size(), false);
  std::vector<std::size_t> stack;
  for (const auto& n : of) {
    stack.push_back(id(n));
    seen[stack.back()] = true;
  }
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t p : in_[v]) {
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  NodeSet out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (seen[i]) out.insert(names_[i]);
  }
  return out;
}

Dag::NodeSet Dag::descendants(const NodeSet& of) const {
  std::vector<bool> seen(names_.size(), false);
  std::vector<std::size_t> stack;
  for (const auto& n : of) {
    stack.push_back(id(n));
    seen[stack.back()] = true;
  }
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t c : out_[v]) {
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
    }
  }
  NodeSet out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (seen[i]) out.insert(names_[i]);
  }
  return out;
}

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      flush();
      out.emplace_back("->");
      ++i;
    } else if (c == '=') {
      flush();
      out.emplace_back("=");
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

Dag parse_dag(std::string_view text) {
  Dag dag;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = tokenize(line);
    auto fail = [&](const std::string& what) -> void {
      throw ConfigError("line " + std::to_string(line_no) + ": " + what);
    };
    try {
      if (tokens.empty()) {
        // blank or comment
      } else if (tokens.size() == 3 && tokens[1] == "->") {
        if (!is_identifier(tokens[0])) fail("unknown token '" + tokens[0] + "'");
        if (!is_identifier(tokens[2])) fail("unknown token '" + tokens[2] + "'");
        dag.add_edge(tokens[0], tokens[2]);
      } else if (tokens.size() == 4 && tokens[0] == "role" && tokens[2] == "=") {
        if (!is_identifier(tokens[1])) fail("unknown token '" + tokens[1] + "'");
        bool known = false;
        for (const auto& [role, name] : kRoleNames) {
          if (tokens[3] == name) {
            dag.set_role(tokens[1], role);
            known = true;
          }
        }
        if (!known) fail("unknown role '" + tokens[3] + "'");
      } else {
        std::string bad = tokens.front();
        for (const auto& t : tokens) {
          if (t != "->" && t != "=" && t != "role" && !is_identifier(t)) {
            bad = t;
            break;
          }
        }
        fail("unknown token '" + bad + "'");
      }
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw ConfigError("line " + std::to_string(line_no) + ": " + msg);
    }
    if (end == text.size()) break;
  }
  return dag;
}

namespace {

struct BallState {
  std::string node;
  bool up;  // arrived from a child
  bool operator<(const BallState& o) const { return node != o.node ? node < o.node : up < o.up; }
};

void check_sets(const Dag& dag, const Dag::NodeSet& a, const Dag::NodeSet& b, const Dag::NodeSet& z) {
  for (const auto* s : {&a, &b, &z}) {
    for (const auto& n : *s) {
      if (!dag.has_node(n)) throw ConfigError("unknown node '" + n + "'");
    }
  }
  for (const auto& n : a) {
    if (b.count(n) || z.count(n)) throw ConfigError("d-separation sets must be disjoint ('" + n + "')");
  }
  for (const auto& n : b) {
    if (z.count(n)) throw ConfigError("d-separation sets must be disjoint ('" + n + "')");
  }
}

}  // namespace

std::optional<std::vector<std::string>> active_path(const Dag& dag, const Dag::NodeSet& a, const Dag::NodeSet& b,
                                                    const Dag::NodeSet& z) {
  check_sets(dag, a, b, z);
  const Dag::NodeSet anc_z = dag.ancestors(z);
  std::map<BallState, std::optional<BallState>> pred;
  std::deque<BallState> queue;
  for (const auto& n : a) {
    BallState s{n, true};
    pred[s] = std::nullopt;
    queue.push_back(s);
  }
  auto push = [&](const BallState& from, BallState to) {
    if (pred.count(to)) return;
    pred[to] = from;
    queue.push_back(std::move(to));
  };
  while (!queue.empty()) {
    const BallState s = queue.front();
    queue.pop_front();
    const bool in_z = z.count(s.node) > 0;
    if (!in_z && b.count(s.node)) {
      std::vector<std::string> path;
      std::optional<BallState> cur = s;
      while (cur) {
        path.push_back(cur->node);
        cur = pred[*cur];
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    if (s.up) {
      if (in_z) continue;
      for (const auto& p : dag.parents(s.node)) push(s, {p, true});
      for (const auto& c : dag.children(s.node)) push(s, {c, false});
    } else {
      if (!in_z) {
        for (const auto& c : dag.children(s.node)) push(s, {c, false});
      }
      if (anc_z.count(s.node)) {
        for (const auto& p : dag.parents(s.node)) push(s, {p, true});
      }
    }
  }
  return std::nullopt;
}

bool d_separated(const Dag& dag, const Dag::NodeSet& a, const Dag::NodeSet& b, const Dag::NodeSet& z) {
  return !active_path(dag, a, b, z).has_value();
}

Dag mutilate(const Dag& dag, const Dag::NodeSet& remove_incoming, const Dag::NodeSet& remove_outgoing) {
  for (const auto* s : {&remove_incoming, &remove_outgoing}) {
    for (const auto& n : *s) {
      if (!dag.has_node(n)) throw ConfigError("unknown node '" + n + "'");
    }
  }
  Dag out;
  for (const auto& n : dag.nodes()) out.add_node(n);
  for (const auto& [from, to] : dag.edges()) {
    if (remove_incoming.count(to) || remove_outgoing.count(from)) continue;
    out.add_edge(from, to);
  }
  for (const auto& [n, r] : dag.roles()) out.set_role(n, r);
  return out;
}

namespace {

struct Roles {
  std::string t, y, s;
};

Roles criterion_roles(const Dag& dag) {
  return {dag.unique_role(Role::Treatment), dag.unique_role(Role::Outcome), dag.unique_role(Role::Selection)};
}

CriterionReport fail(Criterion c, const std::string& clause, std::optional<std::vector<std::string>> path = std::nullopt) {
  CriterionReport r;
  r.criterion = c;
  r.holds = false;
  r.failed_clause = clause;
  r.witness_path = std::move(path);
  return r;
}

/// Nodes other than T on a directed path T -> ... -> Y.
Dag::NodeSet proper_causal_nodes(const Dag& dag, const Roles& r) {
  const Dag cut_in = mutilate(dag, {r.t}, {});
  const Dag cut_out = mutilate(dag, {}, {r.t});
  Dag::NodeSet de = cut_in.descendants({r.t});
  de.erase(r.t);
  const Dag::NodeSet an = cut_out.ancestors({r.y});
  Dag::NodeSet out;
  for (const auto& n : de) {
    if (an.count(n)) out.insert(n);
  }
  return out;
}

/// Drops the first edge of every proper causal path so that only
/// non-causal T-Y paths remain.
Dag proper_backdoor_graph(const Dag& dag, const Roles& r) {
  const Dag::NodeSet pcp = proper_causal_nodes(dag, r);
  Dag out;
  for (const auto& n : dag.nodes()) out.add_node(n);
  for (const auto& [from, to] : dag.edges()) {
    if (from == r.t && pcp.count(to)) continue;
    out.add_edge(from, to);
  }
  return out;
}

std::optional<std::string> forbidden_member(const Dag& dag, const Roles& r, const Dag::NodeSet& z) {
  const Dag cut_in = mutilate(dag, {r.t}, {});
  const Dag::NodeSet forbidden = cut_in.descendants(proper_causal_nodes(dag, r));
  for (const auto& n : z) {
    if (forbidden.count(n)) return n;
  }
  return std::nullopt;
}

Dag::NodeSet with(Dag::NodeSet s, const std::string& n) {
  s.insert(n);
  return s;
}

std::optional<std::vector<std::string>> blocked_or_path(const Dag& g, const std::string& a, const std::string& b,
                                                       const Dag::NodeSet& z) {
  return active_path(g, {a}, {b}, z);
}

}  // namespace

CriterionReport check_criterion(const Dag& dag, Criterion criterion, const Dag::NodeSet& z) {
  const Roles r = criterion_roles(dag);
  for (const auto& n : z) {
    if (!dag.has_node(n)) throw ConfigError("unknown node '" + n + "'");
    if (n == r.t || n == r.y || n == r.s) throw ConfigError("adjustment set may not contain '" + n + "'");
  }
  const bool t_anc_s = dag.ancestors({r.s}).count(r.t) > 0;
  const Dag backdoor = proper_backdoor_graph(dag, r);
  const Dag no_in_t = mutilate(dag, {r.t}, {});
  const Dag no_out_t = mutilate(dag, {}, {r.t});

  switch (criterion) {
    case Criterion::SelectionBackdoor:
    case Criterion::GACT: {
      const bool classic = criterion == Criterion::SelectionBackdoor;
      if (classic) {
        const Dag::NodeSet de = dag.descendants({r.t});
        for (const auto& n : z) {
          if (de.count(n)) return fail(criterion, "1", std::vector<std::string>{r.t, n});
        }
      } else if (auto bad = forbidden_member(dag, r, z)) {
        return fail(criterion, "a", std::vector<std::string>{*bad});
      }
      if (auto p = blocked_or_path(backdoor, r.t, r.y, with(z, r.s))) return fail(criterion, classic ? "2" : "b", p);
      if (auto p = blocked_or_path(no_in_t, r.y, r.s, {r.t})) return fail(criterion, classic ? "3" : "c", p);
      if (t_anc_s) {
        if (auto p = blocked_or_path(no_out_t, r.t, r.y, z)) return fail(criterion, classic ? "4" : "d", p);
      }
      break;
    }
    case Criterion::SelectionBackdoorExt:
    case Criterion::GACTExt: {
      const bool classic = criterion == Criterion::SelectionBackdoorExt;
      if (classic) {
        const Dag::NodeSet de = dag.descendants({r.t});
        for (const auto& n : z) {
          if (de.count(n)) return fail(criterion, "1", std::vector<std::string>{r.t, n});
        }
        if (auto p = blocked_or_path(backdoor, r.t, r.y, with(z, r.s))) return fail(criterion, "2", p);
      } else {
        if (auto bad = forbidden_member(dag, r, z)) return fail(criterion, "a", std::vector<std::string>{*bad});
        if (auto p = blocked_or_path(backdoor, r.t, r.y, z)) return fail(criterion, "b", p);
      }
      if (auto p = blocked_or_path(dag, r.y, r.s, with(z, r.t))) return fail(criterion, classic ? "3" : "c", p);
      break;
    }
    case Criterion::SId: {
      if (t_anc_s) return fail(criterion, "treatment_ancestor_of_selection");
      if (auto p = blocked_or_path(no_out_t, r.t, r.y, with(z, r.s))) return fail(criterion, "conditional_independence", p);
      break;
    }
  }
  CriterionReport ok;
  ok.criterion = criterion;
  ok.holds = true;
  return ok;
}

TemplateClassification classify_selection_template(const Dag& dag) {
  const auto bad = [] { return ConfigError("graph does not match the four-node selection template"); };
  if (dag.nodes().size() != 4 || dag.roles().size() != 4) throw bad();
  for (Role role : {Role::Treatment, Role::Outcome, Role::Covariate, Role::Selection}) {
    if (dag.with_role(role).size() != 1) throw bad();
  }
  const std::string s = dag.unique_role(Role::Selection);
  if (!dag.children(s).empty() || dag.parents(s).empty()) throw bad();
  const Dag::NodeSet z{dag.unique_role(Role::Covariate)};

  TemplateClassification out;
  if (check_criterion(dag, Criterion::GACT, z).holds) {
    out.dag_framework = DagVerdict::Yes;
  } else if (check_criterion(dag, Criterion::GACTExt, z).holds) {
    out.dag_framework = DagVerdict::YesWithExternal;
  }
  out.s_id = check_criterion(dag, Criterion::SId, z).holds;
  return out;
}

}  // namespace selbias
