#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfrt/ast.hpp"

// Concrete data flow semantics: execution maps over interned nodes, the
// computational order on values, bidirectional propagation between tables,
// and the transformer `step` whose least fixpoint is the program semantics.

namespace dfrt {

using Stack = std::vector<LocId>;  // most recent call site first

using NodeId = int32_t;
using EnvId = int32_t;

// Interns environments (var -> variable node) and execution nodes. Both the
// concrete and the abstract semantics use this; they differ only in how
// stacks are extended.
class NodeArena {
 public:
  NodeArena();

  EnvId empty_env() const { return 0; }
  EnvId env_extend(EnvId env, VarId v, NodeId n);
  NodeId env_lookup(EnvId env, VarId v) const;  // -1 when unbound
  const std::map<VarId, NodeId> &env_map(EnvId env) const;

  NodeId expr_node(LocId loc, EnvId env);
  NodeId var_node(VarId var, EnvId env, const Stack &stack);

  struct Node {
    bool is_var;
    LocId loc;  // expression location, or the variable's binder id
    EnvId env;
    Stack stack;  // variable nodes only
  };
  const Node &node(NodeId id) const { return nodes_[id]; }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::map<VarId, NodeId>> envs_;
  std::map<std::map<VarId, NodeId>, EnvId> env_ids_;
  std::vector<Node> nodes_;
  std::map<std::tuple<bool, LocId, EnvId, Stack>, NodeId> node_ids_;
};

class CValue;
using CEntry = std::pair<CValue, CValue>;  // input, output

// Sparse table: stacks with a non-(bot,bot) entry only.
struct CTable;

class CValue {
 public:
  enum class Kind { Bot, Err, Con, Tab };

  CValue() : kind_(Kind::Bot) {}
  static CValue bot() { return CValue(); }
  static CValue err();
  static CValue con(Constant c);
  static CValue table();  // empty table
  static CValue table(std::shared_ptr<const CTable> t);

  Kind kind() const { return kind_; }
  bool is_bot() const { return kind_ == Kind::Bot; }
  bool is_err() const { return kind_ == Kind::Err; }
  bool is_con() const { return kind_ == Kind::Con; }
  bool is_table() const { return kind_ == Kind::Tab; }
  const Constant &constant() const { return c_; }
  const CTable &tab() const { return *tab_; }

  friend bool operator==(const CValue &a, const CValue &b);
  friend bool operator!=(const CValue &a, const CValue &b) { return !(a == b); }

  std::string str() const;  // [s < in -> out, ...] rendering

 private:
  Kind kind_;
  Constant c_;
  std::shared_ptr<const CTable> tab_;
};

struct CTable {
  std::map<Stack, CEntry> entries;
  friend bool operator==(const CTable &a, const CTable &b);
};

// Builder helper: assembles a table, dropping (bot,bot) entries.
CValue make_table(std::map<Stack, CEntry> entries);
CEntry table_entry(const CValue &v, const Stack &s);  // (bot,bot) default

bool value_safe(const CValue &v);
bool value_leq(const CValue &a, const CValue &b);
CValue value_join(const CValue &a, const CValue &b);
CValue value_join(const std::vector<CValue> &vs);

// Bidirectional propagation: inputs of the right table flow backward into
// the left, outputs flow forward. Returns the updated pair.
std::pair<CValue, CValue> value_prop(const CValue &a, const CValue &b);

// Execution map; the distinguished error map (every node err) is a flag.
struct ExecMap {
  std::map<NodeId, CValue> entries;  // non-bot only
  bool top = false;

  CValue at(NodeId n) const;
  friend bool operator==(const ExecMap &a, const ExecMap &b);
  friend bool operator!=(const ExecMap &a, const ExecMap &b) {
    return !(a == b);
  }
};

bool map_leq(const ExecMap &a, const ExecMap &b);
bool map_safe(const ExecMap &m);

// One application of the transformer from the given evaluation point.
// Returns the value computed for e's node plus the updated map.
std::pair<CValue, ExecMap> concrete_step(const ExprPtr &e, NodeArena &arena,
                                         EnvId env, const Stack &stack,
                                         const ExecMap &m);

struct ConcreteResult {
  ExecMap map;
  bool diverged = false;  // fuel ran out before the chain stabilized
  int iterations = 0;
  std::vector<ExecMap> trace;  // iterates, when requested
};

ConcreteResult run_concrete(const ExprPtr &e, NodeArena &arena, int fuel,
                            bool keep_trace = false);

inline bool concrete_safe(const ExecMap &m) { return map_safe(m); }

}  // namespace dfrt
