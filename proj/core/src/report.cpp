#include "dfrt/report.hpp"

#include <json.hpp>
#include <sstream>

namespace dfrt {

using nlohmann::json;

namespace {

json stack_json(const Stack &s) {
  json a = json::array();
  for (auto l : s) a.push_back(l);
  return a;
}

json value_json(const CValue &v) {
  switch (v.kind()) {
    case CValue::Kind::Bot:
      return json{{"kind", "bot"}};
    case CValue::Kind::Err:
      return json{{"kind", "err"}};
    case CValue::Kind::Con:
      return json{{"kind", "const"},
                  {"bool", v.constant().is_bool},
                  {"value", v.constant().num}};
    case CValue::Kind::Tab: {
      json entries = json::array();
      for (auto &[s, e] : v.tab().entries)
        entries.push_back(json{{"stack", stack_json(s)},
                               {"in", value_json(e.first)},
                               {"out", value_json(e.second)}});
      return json{{"kind", "table"}, {"entries", entries}};
    }
  }
  return {};
}

json node_json(const NodeArena &arena, NodeId n) {
  const auto &nd = arena.node(n);
  json envp = json::array();
  for (auto &[x, vn] : arena.env_map(nd.env))
    envp.push_back(json{{"var", x}, {"node", vn}});
  json out{{"id", n},
           {nd.is_var ? "var" : "loc", nd.loc},
           {"env-path", envp}};
  if (nd.is_var) out["stack"] = stack_json(nd.stack);
  return out;
}

}  // namespace

std::string execmap_to_json(const ExecMap &m, const NodeArena &arena,
                            bool pretty) {
  json out;
  out["top"] = m.top;
  json entries = json::array();
  for (auto &[n, v] : m.entries)
    entries.push_back(
        json{{"node", node_json(arena, n)}, {"value", value_json(v)}});
  out["entries"] = entries;
  return pretty ? out.dump(2) : out.dump();
}

std::string domain_name(DomainKind d) {
  switch (d) {
    case DomainKind::Pred: return "pred";
    case DomainKind::Oct: return "oct";
    case DomainKind::Poly: return "poly";
  }
  return "?";
}

namespace {

json type_json(const BaseDomain &dom, const RefType &t) {
  switch (t.kind()) {
    case RefType::Kind::Bot:
      return json{{"kind", "bot"}};
    case RefType::Kind::Err:
      return json{{"kind", "err"}};
    case RefType::Kind::Base:
      return json{{"kind", "base"}, {"refinement", dom.str(t.base_val())}};
    case RefType::Kind::Fun: {
      json entries = json::array();
      for (auto &[s, e] : t.fn().table)
        entries.push_back(json{{"stack", stack_json(s)},
                               {"in", type_json(dom, e.first)},
                               {"out", type_json(dom, e.second)}});
      return json{{"kind", "fun"},
                  {"depvar", t.fn().name},
                  {"entries", entries}};
    }
  }
  return {};
}

json config_json(const AnalysisConfig &c) {
  return json{{"domain", domain_name(c.domain)},
              {"k", c.k},
              {"widening",
               c.widening == WideningMode::Plain ? "plain" : "thresholds"},
              {"depth-cap", c.depth_cap},
              {"max-iters", c.max_iters}};
}

}  // namespace

std::string report_to_json(const RunReport &rep, const TypeMap &m,
                           Analyzer &an, bool pretty) {
  json out;
  out["program"] = rep.program;
  out["config"] = config_json(rep.config);
  out["verdict"] = rep.verdict.safe ? "SAFE" : "UNSAFE";
  out["iterations"] = rep.iterations;
  out["converged"] = rep.converged;
  out["timing"] = rep.seconds;
  if (!rep.verdict.safe) {
    out["witness"] = json{{"loc", rep.verdict.witness_loc},
                          {"render", rep.verdict.witness_render}};
  }
  json types = json::array();
  for (auto &[n, t] : m.entries) {
    const auto &nd = an.arena().node(n);
    json e{{"node", n},
           {nd.is_var ? "var" : "loc", nd.loc},
           {"pretty", type_str(an.domain(), t)},
           {"type", type_json(an.domain(), t)}};
    if (nd.is_var) e["name"] = an.var_name(nd.loc);
    types.push_back(e);
  }
  out["types"] = types;
  return pretty ? out.dump(2) : out.dump();
}

std::string report_to_text(const RunReport &rep, const TypeMap &m,
                           Analyzer &an) {
  std::ostringstream os;
  os << rep.program << ": " << (rep.verdict.safe ? "SAFE" : "UNSAFE")
     << " (domain=" << domain_name(rep.config.domain) << " k=" << rep.config.k
     << ", " << rep.iterations << " iterations, " << rep.seconds << "s)\n";
  if (!rep.verdict.safe && !rep.verdict.witness_render.empty())
    os << "  error witness: " << rep.verdict.witness_render << "\n";
  for (auto &[n, t] : m.entries) {
    const auto &nd = an.arena().node(n);
    if (nd.is_var)
      os << "  " << an.var_name(nd.loc) << " : "
         << type_str(an.domain(), t) << "\n";
  }
  return os.str();
}

}  // namespace dfrt
