#pragma once

#include <set>

#include "dfrt/base_domain.hpp"

// Data flow refinement types: bot, the error type, basic refinements, and
// dependent function types keyed by abstract stacks. Dependency variables
// are globally fresh and carry tag sets (call site location x abstract
// stack) driving the occurs-check style shape widening.

namespace dfrt {

// Abstract stacks: location sequences of length <= k, truncating concat.
using AbsStack = Stack;
AbsStack abs_concat(LocId l, const AbsStack &s, int k);
AbsStack stack_abstract(const Stack &s, int k);  // rho: truncation

using TagSet = std::set<std::pair<LocId, AbsStack>>;

class RefType;
using TypeEntry = std::pair<RefType, RefType>;  // input, output

struct FunData;

class RefType {
 public:
  enum class Kind { Bot, Err, Base, Fun };

  RefType() : kind_(Kind::Bot) {}
  static RefType bot() { return RefType(); }
  static RefType err();
  static RefType base(BaseVal b);
  static RefType fun(VarId depvar, std::string name, TagSet tags,
                     std::map<AbsStack, TypeEntry> table);

  Kind kind() const { return kind_; }
  bool is_bot() const { return kind_ == Kind::Bot; }
  bool is_err() const { return kind_ == Kind::Err; }
  bool is_base() const { return kind_ == Kind::Base; }
  bool is_fun() const { return kind_ == Kind::Fun; }
  const BaseVal &base_val() const { return base_; }
  const FunData &fn() const { return *fun_; }

 private:
  Kind kind_;
  BaseVal base_;
  std::shared_ptr<const FunData> fun_;
};

struct FunData {
  VarId depvar;
  std::string name;  // display
  TagSet tags;
  std::map<AbsStack, TypeEntry> table;  // no (bot,bot) entries

  TypeEntry entry(const AbsStack &s) const {
    auto it = table.find(s);
    return it == table.end() ? TypeEntry{} : it->second;
  }
  // called-at: input is not bot
  bool called_at(const AbsStack &s) const {
    auto it = table.find(s);
    return it != table.end() && !it->second.first.is_bot();
  }
};

// Shared context for type operations: the refinement domain, fresh
// dependency variable supply, widening thresholds, and the table depth cap.
struct TypeCtx {
  const BaseDomain &dom;
  WidenHints hints;
  int depth_cap = 20;
  uint32_t next_depvar = 2'000'000;

  explicit TypeCtx(const BaseDomain &d) : dom(d) {}
  VarId fresh_depvar() { return next_depvar++; }
};

struct TypeEnv {
  Scope scope;
  std::map<VarId, RefType> types;  // x -> type over scope minus x

  bool valid() const;
};

bool type_safe(const RefType &t);
int type_depth(const RefType &t);  // nesting depth of tables; base/bot = 0

bool type_leq(TypeCtx &cx, const RefType &a, const RefType &b);
bool type_equal(TypeCtx &cx, const RefType &a, const RefType &b);
RefType type_join(TypeCtx &cx, const RefType &a, const RefType &b);
RefType type_meet(TypeCtx &cx, const RefType &a, const RefType &b);

RefType const_type(TypeCtx &cx, Constant c, const TypeEnv &env);
RefType type_strengthen(TypeCtx &cx, const RefType &t, const ScopeVar &x,
                        const RefType &tx);
RefType type_env_strengthen(TypeCtx &cx, const RefType &t, const TypeEnv &env);
RefType type_eq_var(TypeCtx &cx, const RefType &t, VarId x);
RefType type_project(TypeCtx &cx, const RefType &t, VarId x);
// rename a scope variable (or dependency variable) in all base payloads
RefType type_rename_var(TypeCtx &cx, const RefType &t, VarId from,
                        const ScopeVar &to);
// rescope a base payload to a wider scope (function types are unaffected;
// their components weaken lazily)
RefType type_extend_scope(TypeCtx &cx, const RefType &t, const Scope &sup);
// conjoin a scope fact (nu-free base value) into every base payload
RefType type_constrain(TypeCtx &cx, const RefType &t, const BaseVal &fact);

bool subtype(TypeCtx &cx, const RefType &a, const RefType &b);
std::pair<RefType, RefType> type_prop(TypeCtx &cx, const RefType &a,
                                      const RefType &b);

RefType shape(const RefType &t);
RefType shape_widen(TypeCtx &cx, const RefType &a, const RefType &b);
RefType type_widen(TypeCtx &cx, const RefType &a, const RefType &b);

std::string type_str(const BaseDomain &dom, const RefType &t);

}  // namespace dfrt
