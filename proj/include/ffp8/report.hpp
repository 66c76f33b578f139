// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

/*
 * Machine-readable reports.
 *
 * Every report is a JSON object
 *
 *   {"body": ..., "inputs": {role: sha256-hex}, "kind": ..., "tool_version": ...}
 *
 * serialized canonically: keys sorted, no whitespace, integers verbatim,
 * other numbers printed with 9 significant digits ("%.9g"), infinities as
 * the strings "+inf" / "-inf".
 *
 * Body schemas by kind:
 *   format_table   {format:{x,y,z,b,n}, window:{min_subnormal,min_normal,max},
 *                   distinct_values, [values]}
 *   coverage       {tensors:[{name, role, stats:{...}, [format], [coverage:{below_window_frac,
 *                   in_denorm_frac, in_norm_frac, above_window_frac, zero_count}]}]}
 *   search_result  {tensor, format:{x,y,z,b,n}, report:{...}}
 *   assignment     [{layer, role, x, y, z, b}, ...]; layer "global" rows hold
 *                  the per-role fallback
 *   eval           {fp32_top1, samples, [quantized_top1, drop_pp]}
 */

#ifndef FFP8_REPORT_HPP
#define FFP8_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ffp8/analysis.hpp"
#include "ffp8/assignment.hpp"
#include "ffp8/error.hpp"
#include "ffp8/format.hpp"
#include "ffp8/tensor.hpp"

namespace ffp8 {

inline constexpr const char* kToolVersion = "1.0.0";

using Json = nlohmann::json;

namespace detail {

inline void dump_canonical(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        dump_canonical(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_canonical(j[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isnan(v)) {
        out += "\"nan\"";
      } else if (std::isinf(v)) {
        out += v > 0 ? "\"+inf\"" : "\"-inf\"";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        out += buf;
      }
      break;
    }
    default:
      out += j.dump();
  }
}

inline void require(bool ok, std::string_view kind, std::string_view what) {
  if (!ok) throw Error(Errc::SchemaViolation, std::string(kind) + " report: " + std::string(what));
}

inline bool has_keys(const Json& j, std::initializer_list<const char*> keys) {
  if (!j.is_object()) return false;
  for (const char* k : keys)
    if (!j.contains(k)) return false;
  return true;
}

inline void validate_body(std::string_view kind, const Json& body) {
  if (kind == "format_table") {
    require(has_keys(body, {"format", "window", "distinct_values"}), kind, "needs format, window, distinct_values");
    require(has_keys(body["format"], {"x", "y", "z", "b", "n"}), kind, "format needs x, y, z, b, n");
    require(has_keys(body["window"], {"min_subnormal", "min_normal", "max"}), kind, "window incomplete");
  } else if (kind == "coverage") {
    require(has_keys(body, {"tensors"}) && body["tensors"].is_array(), kind, "needs a tensors array");
    for (const Json& t : body["tensors"]) {
      require(has_keys(t, {"name", "role", "stats"}), kind, "tensor entries need name, role, stats");
      if (t.contains("coverage"))
        require(has_keys(t["coverage"], {"below_window_frac", "in_denorm_frac", "in_norm_frac", "above_window_frac"}),
                kind, "coverage entries need the four window fractions");
    }
  } else if (kind == "search_result") {
    require(has_keys(body, {"tensor", "format", "report"}), kind, "needs tensor, format, report");
  } else if (kind == "assignment") {
    require(body.is_array(), kind, "body must be an array");
    for (const Json& row : body) {
      require(has_keys(row, {"layer", "role", "x", "y", "z", "b"}), kind, "rows need layer, role, x, y, z, b");
      require(row["role"] == "weight" || row["role"] == "activation", kind, "role must be weight or activation");
    }
  } else if (kind == "eval") {
    require(has_keys(body, {"fp32_top1", "samples"}), kind, "needs fp32_top1 and samples");
  } else {
    throw Error(Errc::SchemaViolation, "unknown report kind '" + std::string(kind) + "'");
  }
}

}  // namespace detail

/// Canonical text of any JSON value.
inline std::string canonical_json(const Json& j) {
  std::string out;
  detail::dump_canonical(j, out);
  return out;
}

/// Validates `body` against `kind` and renders the wrapped report, newline
/// terminated.
inline std::string emit_report(std::string_view kind, const Json& body, const Json& inputs = Json::object()) {
  detail::validate_body(kind, body);
  Json doc = {{"kind", std::string(kind)}, {"tool_version", kToolVersion}, {"inputs", inputs}, {"body", body}};
  return canonical_json(doc) + "\n";
}

inline Json format_json(const Format& f) {
  return {{"x", f.sign_bits()}, {"y", f.exp_bits()}, {"z", f.frac_bits()}, {"b", f.bias()}, {"n", f.width()}};
}

inline Json window_json(const RangeWindow& w) {
  return {{"min_subnormal", w.min_subnormal}, {"min_normal", w.min_normal}, {"max", w.max}};
}

inline Json stats_json(const TensorStats& s) {
  Json hist = Json::object();
  for (const auto& [bin, n] : s.log2_hist) hist[std::to_string(bin)] = n;
  return {{"max_mag", s.max_mag},       {"min_nonzero_mag", s.min_nonzero_mag}, {"zero_count", s.zero_count},
          {"negative_count", s.negative_count}, {"total_count", s.total_count},   {"log2_hist", hist}};
}

inline Json coverage_json(const Coverage& c) {
  return {{"below_window_frac", c.below_window_frac()},
          {"in_denorm_frac", c.in_denorm_frac()},
          {"in_norm_frac", c.in_norm_frac()},
          {"above_window_frac", c.above_window_frac()},
          {"zero_count", c.zero_count}};
}

inline Json quant_report_json(const QuantReport& r) {
  return {{"below_window_count", r.below_window_count},
          {"above_window_count", r.above_window_count},
          {"in_window_count", r.in_window_count},
          {"mse", r.mse},
          {"max_abs_err", r.max_abs_err},
          {"sqnr_db", r.sqnr_db}};
}

/// The assignment body: one row per layer and role, then the "global"
/// fallback rows.
inline Json assignment_json(const Assignment& a) {
  Json rows = Json::array();
  const auto row = [&](const std::string& layer, const char* role, const Format& f) {
    rows.push_back({{"layer", layer}, {"role", role}, {"x", f.sign_bits()}, {"y", f.exp_bits()},
                    {"z", f.frac_bits()}, {"b", f.bias()}});
  };
  for (const LayerFormats& l : a.layers) {
    row(l.layer, "weight", l.weight);
    row(l.layer, "activation", l.activation);
  }
  if (a.global_weight) row("global", "weight", *a.global_weight);
  if (a.global_activation) row("global", "activation", *a.global_activation);
  return rows;
}

/// Accepts a bare row array or a full assignment report. Every layer
/// needs exactly one weight row and one activation row.
inline Assignment parse_assignment(const Json& doc) {
  const Json& rows = doc.is_object() && doc.contains("body") ? doc["body"] : doc;
  detail::validate_body("assignment", rows);
  struct Partial {
    std::string layer;
    std::optional<Format> weight, activation;
  };
  std::vector<Partial> partial;
  Assignment a;
  try {
    for (const Json& r : rows) {
      const Format f = Format::make(r["x"].get<int>(), r["y"].get<int>(), r["z"].get<int>(), r["b"].get<int>());
      const std::string layer = r["layer"].get<std::string>();
      const bool weight = r["role"] == "weight";
      if (layer == "global") {
        (weight ? a.global_weight : a.global_activation) = f;
        continue;
      }
      auto it = std::find_if(partial.begin(), partial.end(), [&](const Partial& p) { return p.layer == layer; });
      if (it == partial.end()) it = partial.insert(partial.end(), Partial{layer, {}, {}});
      std::optional<Format>& slot = weight ? it->weight : it->activation;
      if (slot) throw Error(Errc::SchemaViolation, "layer '" + layer + "' has two " + (weight ? "weight" : "activation") + " rows");
      slot = f;
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("assignment: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaViolation) throw;
    throw Error(Errc::SchemaViolation, std::string("assignment: ") + e.what());
  }
  for (const Partial& p : partial) {
    if (!p.weight || !p.activation)
      throw Error(Errc::SchemaViolation, "layer '" + p.layer + "' needs both a weight and an activation row");
    a.layers.push_back({p.layer, *p.weight, *p.activation});
  }
  return a;
}

}  // namespace ffp8

#endif  // FFP8_REPORT_HPP
