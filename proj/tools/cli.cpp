// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ffp8/ffp8.hpp"

namespace ffp8::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "--fmt x,y,z,b"; a "*" bias is resolved later against a tensor maximum.
struct FormatArg {
  int x = 0, y = 0, z = 0;
  std::optional<int> bias;

  Format resolve(double max_mag) const {
    try {
      if (bias) return Format::make(x, y, z, *bias);
      const int b = max_mag > 0.0 && y >= 1 ? bias_star(y, z, max_mag).bias : default_bias(std::max(y, 1));
      return Format::make(x, y, z, b);
    } catch (const Error& e) {
      throw UsageError(std::string("--fmt: ") + e.what());
    }
  }
};

FormatArg parse_format_arg(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
  if (parts.size() != 4) throw UsageError("--fmt expects x,y,z,b, got '" + text + "'");
  FormatArg f;
  try {
    f.x = std::stoi(parts[0]);
    f.y = std::stoi(parts[1]);
    f.z = std::stoi(parts[2]);
    if (parts[3] != "*") f.bias = std::stoi(parts[3]);
  } catch (const std::logic_error&) {
    throw UsageError("--fmt expects integers x,y,z and an integer or '*' bias, got '" + text + "'");
  }
  return f;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::TruncatedStream, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

struct Loaded {
  ModelBundle bundle;
  std::string digest;
};

Loaded load(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
  return {read_bundle(std::span<const std::uint8_t>(p, bytes.size())), sha256_hex(bytes)};
}

struct LoadedAssignment {
  Assignment assignment;
  std::string digest;
};

LoadedAssignment load_assignment(const std::string& path) {
  const std::string text = read_file(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(Errc::SchemaViolation, path + ": " + e.what());
  }
  return {parse_assignment(doc), sha256_hex(text)};
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Error(Errc::MalformedStream, "failed writing " + path);
}

/// Dataset flags shared by train / search / eval / analyze. Unset flags fall
/// back to what the bundle recorded at training time, then to defaults.
struct DatasetFlags {
  std::uint64_t seed = 7;
  int samples = 2000;
  int features = 16;
  int classes = 3;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* features_opt = nullptr;
  CLI::Option* classes_opt = nullptr;

  void add_to(CLI::App* app) {
    seed_opt = app->add_option("--seed", seed, "Dataset seed");
    samples_opt = app->add_option("--samples", samples, "Dataset size")->check(CLI::PositiveNumber);
    features_opt = app->add_option("--features", features, "Feature count")->check(CLI::PositiveNumber);
    classes_opt = app->add_option("--classes", classes, "Class count")->check(CLI::PositiveNumber);
  }

  refnet::Dataset make(const ModelBundle* model) const {
    auto pick = [&](CLI::Option* opt, const char* key, auto value) {
      if ((opt && opt->count() > 0) || !model) return value;
      if (const std::string* s = model->meta(key)) return static_cast<decltype(value)>(std::stoull(*s));
      return value;
    };
    return refnet::make_dataset(pick(seed_opt, "dataset.seed", seed), pick(samples_opt, "dataset.samples", samples),
                                pick(features_opt, "dataset.features", features),
                                pick(classes_opt, "dataset.classes", classes));
  }
};

refnet::Matrix head_rows(const refnet::Matrix& m, std::size_t rows) {
  rows = std::min(rows, m.rows);
  refnet::Matrix out(rows, m.cols);
  std::copy_n(m.data.begin(), rows * m.cols, out.data.begin());
  return out;
}

std::vector<int> head(const std::vector<int>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

void parse_y_range(const std::string& text, SearchConfig& cfg) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      cfg.y_min = cfg.y_max = std::stoi(text);
    } else {
      cfg.y_min = std::stoi(text.substr(0, dots));
      cfg.y_max = std::stoi(text.substr(dots + 2));
    }
  } catch (const std::logic_error&) {
    throw UsageError("--y-range expects A..B, got '" + text + "'");
  }
  if (cfg.y_min < 1 || cfg.y_max < cfg.y_min) throw UsageError("--y-range needs 1 <= A <= B, got '" + text + "'");
}

/// Names of dense weight matrices; every FP32 tensor when the bundle has no
/// dense layers.
std::vector<std::string> weight_matrices(const ModelBundle& m) {
  std::vector<std::string> out;
  for (const Layer& l : m.layers)
    if (l.kind == LayerKind::dense && !l.tensors.empty()) out.push_back(l.tensors.front());
  if (out.empty())
    for (const Tensor& t : m.tensors)
      if (t.is_fp32()) out.push_back(t.name);
  return out;
}

int dispatch(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::string out_path;
  std::string bundle_path;
  std::string assignment_path;
  std::string fmt_text;

  // inspect
  bool list_values = false;
  auto* inspect = app.add_subcommand("inspect", "Range window and value table of a format");
  inspect->add_option("--fmt", fmt_text, "x,y,z,b")->required();
  inspect->add_flag("--values", list_values, "Include every representable value");
  inspect->add_option("--out", out_path, "Report file");

  // analyze
  bool with_activations = false;
  std::size_t calib_rows = 256;
  DatasetFlags analyze_ds;
  auto* analyze = app.add_subcommand("analyze", "Magnitude statistics and window coverage per tensor");
  analyze->add_option("--bundle", bundle_path, "Input bundle")->required();
  analyze->add_option("--fmt", fmt_text, "x,y,z,b (b may be *)");
  analyze->add_flag("--activations", with_activations, "Also analyze captured activations");
  analyze->add_option("--calib", calib_rows, "Calibration rows for --activations")->check(CLI::PositiveNumber);
  analyze->add_option("--out", out_path, "Report file");
  analyze_ds.add_to(analyze);

  // search
  SearchConfig cfg;
  std::string objective = "sqnr";
  std::string y_range;
  std::string tensor_name;
  DatasetFlags search_ds;
  auto* search = app.add_subcommand("search", "Best-fit format search (one tensor or layer-wise)");
  search->add_option("--bundle", bundle_path, "Input FP32 bundle")->required();
  search->add_option("--tensor", tensor_name, "Search a single tensor instead of the whole model");
  search->add_option("--objective", objective, "sqnr|accuracy")->check(CLI::IsMember({"sqnr", "accuracy"}));
  search->add_option("--y-range", y_range, "Exponent widths A..B");
  search->add_option("--bias-sweep", cfg.bias_sweep, "Biases tried below bias_star")->check(CLI::NonNegativeNumber);
  search->add_option("--width", cfg.width, "Total bits n")->check(CLI::Range(kMinWidth, kMaxWidth));
  search->add_option("--calib", calib_rows, "Calibration rows")->check(CLI::PositiveNumber);
  search->add_option("--out", out_path, "Report file");
  search_ds.add_to(search);

  // quantize
  auto* quantize = app.add_subcommand("quantize", "Encode weight matrices as FFP8");
  quantize->add_option("--bundle", bundle_path, "Input FP32 bundle")->required();
  auto* q_assign = quantize->add_option("--assignment", assignment_path, "Assignment JSON");
  quantize->add_option("--fmt", fmt_text, "Uniform x,y,z,b (b may be *)")->excludes(q_assign);
  quantize->add_option("--out", out_path, "Output bundle")->required();

  // dequantize
  auto* dequantize = app.add_subcommand("dequantize", "Expand FFP8 tensors back to FP32");
  dequantize->add_option("--bundle", bundle_path, "Input bundle")->required();
  dequantize->add_option("--out", out_path, "Output bundle")->required();

  // train
  refnet::TrainConfig train_cfg;
  DatasetFlags train_ds;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Train the FP32 reference classifier");
  train->add_option("--out", bundle_path, "Output bundle")->required();
  train->add_option("--epochs", train_cfg.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--train-seed", train_seed, "Weight-init / shuffle seed (defaults to --seed)");
  train_ds.add_to(train);

  // eval
  DatasetFlags eval_ds;
  auto* eval = app.add_subcommand("eval", "Top-1 accuracy, FP32 and under an assignment");
  eval->add_option("--bundle", bundle_path, "Input bundle")->required();
  eval->add_option("--assignment", assignment_path, "Assignment JSON");
  eval->add_option("--out", out_path, "Report file");
  eval_ds.add_to(eval);

  // convert
  std::string codes_text;
  std::string in_path;
  auto* convert = app.add_subcommand("convert", "FFP8 codes to FP32 bit patterns");
  convert->add_option("--fmt", fmt_text, "x,y,z,b")->required();
  auto* c_in = convert->add_option("--in", in_path, "Raw code file (1 byte/code, 2 LE bytes when n > 8)");
  convert->add_option("--codes", codes_text, "Comma-separated codes")->excludes(c_in);
  convert->add_option("--out", out_path, "Write little-endian u32 patterns here instead of text");

  app.require_subcommand(1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);

  if (*inspect) {
    const FormatArg fa = parse_format_arg(fmt_text);
    if (!fa.bias) throw UsageError("--fmt: inspect needs a concrete bias, '*' has no tensor to fit");
    const Format f = fa.resolve(0.0);
    const ValueTable table(f);
    Json body = {{"format", format_json(f)}, {"window", window_json(range_window(f))}, {"distinct_values", table.size()}};
    if (list_values) body["values"] = table.values();
    write_text(out_path, emit_report("format_table", body), out);
    return kExitOk;
  }

  if (*analyze) {
    const Loaded in = load(bundle_path);
    std::optional<FormatArg> fa;
    if (!fmt_text.empty()) fa = parse_format_arg(fmt_text);
    Json tensors = Json::array();
    const auto entry = [&](const std::string& name, Role role, std::span<const float> values) {
      const TensorStats st = tensor_stats(values);
      Json e = {{"name", name}, {"role", role_name(role)}, {"stats", stats_json(st)}};
      if (fa) {
        const Format f = fa->resolve(st.max_mag);
        e["format"] = format_json(f);
        e["coverage"] = coverage_json(coverage(values, f));
      }
      tensors.push_back(e);
    };
    for (const Tensor& t : in.bundle.tensors) {
      if (t.is_fp32())
        entry(t.name, t.role, t.values());
      else
        entry(t.name, t.role, dequantize_tensor(t).values());
    }
    if (with_activations) {
      const refnet::Dataset ds = analyze_ds.make(&in.bundle);
      const refnet::Matrix calib = head_rows(ds.train_x, calib_rows);
      const refnet::ForwardResult fwd = refnet::forward(in.bundle, calib);
      const auto layers = refnet::dense_layers(in.bundle);
      for (std::size_t i = 0; i < layers.size(); ++i)
        entry(layers[i].name + ".input", Role::activation, i == 0 ? calib.data : fwd.trace.post[i - 1].data);
    }
    write_text(out_path, emit_report("coverage", {{"tensors", tensors}}, {{"bundle", in.digest}}), out);
    return kExitOk;
  }

  if (*search) {
    const Loaded in = load(bundle_path);
    if (!y_range.empty()) parse_y_range(y_range, cfg);
    cfg.objective = objective == "accuracy" ? Objective::accuracy : Objective::sqnr;
    if (!tensor_name.empty()) {
      const Tensor* t = in.bundle.find(tensor_name);
      if (!t) throw UsageError("--tensor: no tensor named '" + tensor_name + "'");
      if (!t->is_fp32()) throw Error(Errc::ShapeMismatch, tensor_name + " is not FP32");
      const Selection s = select_format(t->values(), cfg);
      Json body = {{"tensor", tensor_name}, {"format", format_json(s.format)}, {"report", quant_report_json(s.report)}};
      write_text(out_path, emit_report("search_result", body, {{"bundle", in.digest}}), out);
      return kExitOk;
    }
    const refnet::Dataset ds = search_ds.make(&in.bundle);
    const refnet::Matrix calib = head_rows(ds.train_x, calib_rows);
    const std::vector<int> calib_y = head(ds.train_y, calib_rows);
    AccuracyFn acc;
    if (cfg.objective == Objective::accuracy)
      acc = [&](const Assignment& a) { return refnet::accuracy(in.bundle, &a, calib, calib_y); };
    const Assignment a = layerwise_optimize(in.bundle, calib, cfg, acc);
    write_text(out_path, emit_report("assignment", assignment_json(a), {{"bundle", in.digest}}), out);
    return kExitOk;
  }

  if (*quantize) {
    Loaded in = load(bundle_path);
    std::optional<Assignment> assignment;
    std::optional<FormatArg> fa;
    if (!assignment_path.empty())
      assignment = load_assignment(assignment_path).assignment;
    else if (!fmt_text.empty())
      fa = parse_format_arg(fmt_text);
    else
      throw UsageError("quantize needs --assignment or --fmt");

    std::vector<std::pair<std::string, Format>> plan;
    if (assignment) {
      for (const Layer& l : in.bundle.layers) {
        if (l.kind != LayerKind::dense || l.tensors.empty()) continue;
        const LayerFormats* lf = assignment->find(l.name);
        if (!lf) throw Error(Errc::MissingAssignment, "assignment has no row for layer '" + l.name + "'");
        plan.emplace_back(l.tensors.front(), lf->weight);
      }
    } else {
      for (const std::string& name : weight_matrices(in.bundle)) {
        const Tensor* t = in.bundle.find(name);
        if (!t) continue;
        if (!t->is_fp32()) throw Error(Errc::ShapeMismatch, name + " is already encoded");
        plan.emplace_back(name, fa->resolve(tensor_stats(*t).max_mag));
      }
    }
    for (const auto& [name, f] : plan) {
      Tensor* t = in.bundle.find(name);
      if (!t->is_fp32()) throw Error(Errc::ShapeMismatch, name + " is already encoded");
      auto [encoded, report] = quantize_tensor(*t, f);
      err << "quantized " << name << " as " << f.to_string() << ": below=" << report.below_window_count
          << " above=" << report.above_window_count << " sqnr_db=" << report.sqnr_db << "\n";
      *t = std::move(encoded);
    }
    save_bundle(in.bundle, out_path);
    return kExitOk;
  }

  if (*dequantize) {
    Loaded in = load(bundle_path);
    for (Tensor& t : in.bundle.tensors)
      if (t.is_encoded()) t = dequantize_tensor(t);
    save_bundle(in.bundle, out_path);
    return kExitOk;
  }

  if (*train) {
    const refnet::Dataset ds = train_ds.make(nullptr);
    train_cfg.seed = train_seed.value_or(train_ds.seed);
    ModelBundle model = refnet::train_baseline(ds, train_cfg);
    model.set_meta("dataset.samples", std::to_string(train_ds.samples));
    model.set_meta("dataset.features", std::to_string(train_ds.features));
    model.set_meta("dataset.classes", std::to_string(train_ds.classes));
    save_bundle(model, bundle_path);
    Json body = {{"fp32_top1", refnet::evaluate(model, nullptr, ds)}, {"samples", ds.val_y.size()}};
    out << emit_report("eval", body);
    return kExitOk;
  }

  if (*eval) {
    const Loaded in = load(bundle_path);
    const refnet::Dataset ds = eval_ds.make(&in.bundle);
    Json inputs = {{"bundle", in.digest}};
    const double base = refnet::evaluate(in.bundle, nullptr, ds);
    Json body = {{"fp32_top1", base}, {"samples", ds.val_y.size()}};
    if (!assignment_path.empty()) {
      const LoadedAssignment la = load_assignment(assignment_path);
      inputs["assignment"] = la.digest;
      const double q = refnet::evaluate(in.bundle, &la.assignment, ds);
      body["quantized_top1"] = q;
      body["drop_pp"] = 100.0 * (base - q);
    }
    write_text(out_path, emit_report("eval", body, inputs), out);
    return kExitOk;
  }

  if (*convert) {
    const FormatArg fa = parse_format_arg(fmt_text);
    if (!fa.bias) throw UsageError("--fmt: convert needs a concrete bias");
    const Format f = fa.resolve(0.0);
    std::vector<Code> codes;
    if (!in_path.empty()) {
      const std::string raw = read_file(in_path);
      const bool wide = f.width() > 8;
      if (wide && raw.size() % 2 != 0) throw Error(Errc::TruncatedStream, in_path + " has an odd byte count");
      for (std::size_t i = 0; i < raw.size(); i += wide ? 2 : 1) {
        unsigned c = static_cast<unsigned char>(raw[i]);
        if (wide) c |= static_cast<unsigned>(static_cast<unsigned char>(raw[i + 1])) << 8;
        codes.push_back(static_cast<Code>(c));
      }
    } else if (!codes_text.empty()) {
      std::stringstream ss(codes_text);
      for (std::string p; std::getline(ss, p, ',');) {
        try {
          const unsigned long v = std::stoul(p, nullptr, 0);
          if (v > 0xFFFF) throw std::out_of_range(p);
          codes.push_back(static_cast<Code>(v));
        } catch (const std::logic_error&) {
          throw UsageError("--codes: cannot parse '" + p + "'");
        }
      }
    } else {
      throw UsageError("convert needs --in or --codes");
    }
    std::vector<std::uint32_t> bits;
    for (Code c : codes) bits.push_back(to_fp32_bits(f, c));
    if (!out_path.empty()) {
      std::string raw;
      for (std::uint32_t b : bits)
        for (int k = 0; k < 4; ++k) raw.push_back(static_cast<char>((b >> (8 * k)) & 0xFF));
      write_text(out_path, raw, out);
    } else {
      char line[32];
      for (std::size_t i = 0; i < codes.size(); ++i) {
        std::snprintf(line, sizeof line, "0x%02x 0x%08x\n", static_cast<unsigned>(codes[i]), bits[i]);
        out << line;
      }
    }
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const bool color = &err == &std::cerr && ::isatty(STDERR_FILENO) && std::getenv("FFP8_NO_COLOR") == nullptr;
  const auto diag = [&](const std::string& msg) {
    if (color)
      err << "\033[31merror:\033[0m " << msg << "\n";
    else
      err << "error: " << msg << "\n";
  };

  CLI::App app{"FFP8 codec and post-training quantization toolkit", "ffp8"};
  try {
    return dispatch(app, args, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    diag(e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    diag(e.what());
    return kExitUsage;
  } catch (const Error& e) {
    diag(e.what());
    return kExitData;
  }
}

}  // namespace ffp8::cli
