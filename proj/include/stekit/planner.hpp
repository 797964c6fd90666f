#pragma once

#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "stekit/spec_string.hpp"
#include "stekit/ste.hpp"

namespace stekit {

/// Frame count the reduction percentages are quoted against.
inline constexpr std::size_t kReferenceFrames = 32;

struct LayerPlan {
  std::size_t t_in = 0;
  std::size_t k = 0;      // replicate-padded frames
  std::size_t units = 0;  // (t_in + k) / t_u
  std::size_t t_out = 0;  // units * t_o
};

struct CompressionPlan {
  std::vector<LayerPlan> layers;
  std::size_t final_frames = 0;
  double compression_fraction = 0.0;  // 1 - out/in at the reference frame count
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;
  long long total_params = 0;
};

/// Frame/token/parameter ledger for running `stack` over a t-frame, p-patch
/// video at width d. The compression fraction is always quoted at the
/// reference count so it matches the ladder labels regardless of t.
inline CompressionPlan plan(std::size_t t, std::size_t p, int d,
                            const StackSpec& stack) {
  if (t < 1) throw contract_error("plan: t must be >= 1");
  for (const LayerSpec& s : stack.layers) require_valid(s, d);

  CompressionPlan out;
  std::size_t cur = t;
  for (const LayerSpec& s : stack.layers) {
    LayerPlan lp;
    lp.t_in = cur;
    lp.k = pad_amount(cur, s.t_u);
    lp.units = (cur + lp.k) / std::size_t(s.t_u);
    lp.t_out = lp.units * std::size_t(s.t_o);
    out.layers.push_back(lp);
    cur = lp.t_out;
  }
  out.final_frames = cur;
  out.compression_fraction =
      1.0 - double(stack_output_frames(kReferenceFrames, stack.layers)) /
                double(kReferenceFrames);
  out.tokens_in = t * p;
  out.tokens_out = out.final_frames * p;
  out.total_params = param_count(stack, d).total;
  return out;
}

inline std::string csv_quote(const std::string& field) {
  if (field.find(',') == std::string::npos &&
      field.find('"') == std::string::npos)
    return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

inline const char* kPlanCsvHeader = "spec,reduction_pct,final_frames,tokens_out,params";

inline std::string plan_csv_row(const StackSpec& stack,
                                const CompressionPlan& p) {
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.2f", 100.0 * p.compression_fraction);
  return csv_quote(format_stack(stack)) + "," + pct + "," +
         std::to_string(p.final_frames) + "," + std::to_string(p.tokens_out) +
         "," + std::to_string(p.total_params);
}

/// One CSV row per stack, all at the same width (and the reference frame
/// count unless told otherwise). An empty stack list yields just the header.
inline std::string ladder_table(const std::vector<StackSpec>& stacks, int d,
                                std::size_t t = kReferenceFrames,
                                std::size_t p = 1) {
  std::string out = std::string(kPlanCsvHeader) + "\n";
  for (const StackSpec& stack : stacks)
    out += plan_csv_row(stack, plan(t, p, d, stack)) + "\n";
  return out;
}

/// The ladder the reduction labels come from.
inline std::vector<StackSpec> paper_ladder() {
  const char* specs[] = {"(2:2)",
                         "(4:3)",
                         "(4:3)-(4:3)",
                         "(2:1)",
                         "(2:1)-(2:1)",
                         "(2:1)-(2:1)-(2:1)",
                         "(2:1)-(2:1)-(2:1)-(2:1)"};
  std::vector<StackSpec> out;
  for (const char* s : specs) out.push_back(parse_stack(s));
  return out;
}

}  // namespace stekit
