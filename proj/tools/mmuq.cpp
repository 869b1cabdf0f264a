/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// mmuq command-line driver.
//
// Exit status: 0 success, 2 when some items failed, 1 on fatal errors.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mmuq/config.hpp"
#include "mmuq/error.hpp"
#include "mmuq/proplab.hpp"
#include "mmuq/random.hpp"
#include "mmuq/records.hpp"

namespace {

using nlohmann::json;
using namespace mmuq;

constexpr int kOk = 0;
constexpr int kFatal = 1;
constexpr int kPartial = 2;

const std::set<std::string> kSubcommands = {"perturb", "estimate", "detect", "mitigate",
                                            "cot",     "prop-check", "report"};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string manifest;
};

RunConfig load_config(const Common& c) {
  if (c.config.empty()) throw Error(ErrorCode::kConfigError, "/: --config is required");
  RunConfig cfg = load_run_config(c.config);
  if (c.seed) override_seed(cfg, *c.seed);
  return cfg;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    write_file(out, text);
  }
}

std::string pretty(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

// Meta for subcommands that run without a config: the arguments are the
// configuration.
json args_meta(const json& args, std::uint64_t seed) {
  RunConfig pseudo;
  pseudo.seed = seed;
  pseudo.canonical = args;
  return run_meta(pseudo);
}

std::vector<DatasetItem> select_items(std::vector<DatasetItem> items,
                                      const std::vector<std::string>& ids) {
  if (ids.empty()) return items;
  std::vector<DatasetItem> out;
  for (const auto& id : ids) {
    bool found = false;
    for (const auto& item : items) {
      if (item.id == id) {
        out.push_back(item);
        found = true;
      }
    }
    if (!found) throw Error(ErrorCode::kConfigError, "/: no manifest item with id " + id);
  }
  return out;
}

int run_perturb(const Common& c, const std::string& in, const std::string& modality,
                const std::string& kind, double degree, const std::string& meta_path) {
  std::uint64_t seed = c.seed.value_or(0);
  std::optional<RunConfig> cfg;
  if (!c.config.empty()) {
    cfg = load_config(c);
    seed = c.seed.value_or(cfg->seed);
  }
  const Modality m = parse_modality(modality);
  if (c.out.empty() && m != Modality::kText) {
    throw Error(ErrorCode::kConfigError, "/: --out is required for binary media");
  }
  const PerturbKind k = parse_kind(m, kind);
  const Degree d(degree);
  Content content = m == Modality::kText ? Content{TextContent{read_file(in)}} : load_content(in, m);

  Backends backends;
  Rephraser rephraser;
  if (cfg) {
    backends = make_backends(cfg->roles);
    rephraser = [&](const std::string& text, double t) {
      return backends.responder->rephrase(text, t);
    };
  }
  const PerturbParams params = cfg ? cfg->options.plan.params : PerturbParams{};
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
  const Content result = perturb(content, k, d, rng, params, rephraser);
  if (c.out.empty()) {
    emit("", std::get<TextContent>(result).text + "\n");
  } else {
    save_content(result, c.out);
  }
  if (!meta_path.empty()) {
    json args = {{"in", in}, {"modality", modality}, {"kind", kind}, {"degree", degree},
                 {"seed", seed}};
    json sidecar = {{"_meta", cfg ? run_meta(*cfg) : args_meta(args, seed)},
                    {"perturbation", args},
                    {"output_hash", hex64(content_hash(result))}};
    write_file(meta_path, pretty(sidecar));
  }
  return kOk;
}

int run_estimate(const Common& c, const std::string& text,
                 const std::vector<std::string>& attach, const std::vector<std::string>& ids) {
  RunConfig cfg = load_config(c);
  Backends backends = make_backends(cfg.roles);
  std::vector<json> rows;
  if (!c.manifest.empty()) {
    for (const auto& item : select_items(load_manifest(c.manifest), ids)) {
      json j = estimate_to_json(estimate_bundle(item.prompt, backends, cfg.options));
      j["id"] = item.id;
      rows.push_back(j);
    }
    emit(c.out, to_jsonl(run_meta(cfg), rows));
    return kOk;
  }
  PromptBundle bundle;
  bundle.text.text = text;
  for (const auto& a : attach) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "/: --attach expects modality=path, got " + a);
    }
    const Modality m = parse_modality(a.substr(0, eq));
    bundle.attachments.emplace(m, load_content(a.substr(eq + 1), m));
  }
  validate(bundle);
  json j = estimate_to_json(estimate_bundle(bundle, backends, cfg.options));
  j["_meta"] = run_meta(cfg);
  emit(c.out, pretty(j));
  return kOk;
}

int run_detect(const Common& c) {
  RunConfig cfg = load_config(c);
  if (c.manifest.empty()) throw Error(ErrorCode::kConfigError, "/: --manifest is required");
  const auto items = load_manifest(c.manifest);
  Backends backends = make_backends(cfg.roles);
  const auto results = detect(items, backends, cfg.options);
  std::vector<json> rows;
  bool partial = false;
  for (const auto& r : results) {
    rows.push_back(detection_to_json(r));
    partial = partial || !r.ok;
    if (!r.ok) std::cerr << "item " << r.record.id << " failed: " << r.error << "\n";
  }
  emit(c.out, to_jsonl(run_meta(cfg), rows));
  return partial ? kPartial : kOk;
}

int run_mitigate(const Common& c, const std::string& records_path) {
  RunConfig cfg = load_config(c);
  if (c.manifest.empty()) throw Error(ErrorCode::kConfigError, "/: --manifest is required");
  const auto items = load_manifest(c.manifest);
  Backends backends = make_backends(cfg.roles);
  const auto detections = records_path.empty()
                              ? detect(items, backends, cfg.options)
                              : parse_detection_results(read_file(records_path));
  const auto outcomes = mitigate(items, detections, backends, cfg.options);
  std::vector<json> rows;
  bool partial = false;
  std::size_t n = 0, before = 0, after = 0, revised = 0;
  for (const auto& o : outcomes) {
    rows.push_back(mitigation_to_json(o));
    partial = partial || !o.ok;
    if (o.initial_correct && o.final_correct) {
      ++n;
      before += *o.initial_correct ? 1 : 0;
      after += *o.final_correct ? 1 : 0;
    }
    revised += o.selected ? 1 : 0;
  }
  json meta = run_meta(cfg);
  meta["top_fraction"] = cfg.options.top_fraction;
  emit(c.out, to_jsonl(meta, rows));
  std::fprintf(stderr, "revised %zu of %zu; accuracy %zu/%zu -> %zu/%zu\n", revised,
               outcomes.size(), before, n, after, n);
  return partial ? kPartial : kOk;
}

int run_cot(const Common& c, const std::vector<std::string>& ids) {
  RunConfig cfg = load_config(c);
  if (c.manifest.empty()) throw Error(ErrorCode::kConfigError, "/: --manifest is required");
  const auto items = select_items(load_manifest(c.manifest), ids);
  Backends backends = make_backends(cfg.roles);
  std::vector<json> rows;
  bool partial = false;
  for (const auto& item : items) {
    try {
      rows.push_back(cot_to_json(item.id, cot(item, backends, cfg.options)));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigError) throw;
      rows.push_back({{"id", item.id}, {"status", "failed"}, {"error", e.what()}});
      partial = true;
    }
  }
  emit(c.out, to_jsonl(run_meta(cfg), rows));
  return partial ? kPartial : kOk;
}

int run_prop_check(const Common& c, const std::vector<double>& sigmas, std::size_t trials,
                   std::vector<double> sensitivity, double cubic, int threads) {
  const std::uint64_t seed = c.seed.value_or(7);
  if (sensitivity.empty()) sensitivity = {1.0};
  SyntheticModel model;
  model.sensitivity = sensitivity;
  model.mean.assign(sensitivity.size(), 0.0);
  model.cubic = cubic;
  const auto fit = fit_proportionality(model, sigmas, trials, seed, threads);
  json per = json::array();
  for (const auto& e : fit.per_sigma) {
    SyntheticModel m = model;
    m.variance = e.sigma * e.sigma;
    per.push_back({{"sigma", e.sigma},
                   {"d_rms", e.d_rms},
                   {"closed_form", closed_form_distance(m)},
                   {"trials", e.trials}});
  }
  json args = {{"sigmas", sigmas}, {"trials", trials}, {"sensitivity", sensitivity},
               {"cubic", cubic}, {"seed", seed}};
  json out = {{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"expected_intercept", fit.expected_intercept},
              {"per_sigma", per},
              {"_meta", args_meta(args, seed)}};
  emit(c.out, pretty(out));
  return kOk;
}

int run_report(const Common& c, const std::string& in, const std::string& csv,
               std::optional<std::size_t> bins) {
  std::size_t bin_count = 10;
  json meta;
  if (!c.config.empty()) {
    RunConfig cfg = load_config(c);
    bin_count = cfg.bin_count;
    meta = run_meta(cfg);
  }
  if (bins) bin_count = *bins;
  std::size_t failed = 0;
  const auto records = parse_detection_records(read_file(in), &failed);
  if (meta.is_null()) meta = args_meta({{"in", in}, {"bin_count", bin_count}}, 0);
  meta["skipped_failed_records"] = failed;
  json report = report_to_json(metric_report(records, bin_count));
  report["_meta"] = meta;
  emit(c.out, pretty(report));
  if (!csv.empty()) write_file(csv, bins_csv(metric_report(records, bin_count).bins));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2 && argv[1][0] != '-' && !kSubcommands.count(argv[1])) {
    std::cerr << "UnknownSubcommand: " << argv[1] << "\n";
    return kFatal;
  }

  CLI::App app{"Multimodal uncertainty estimation toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool manifest) {
    sub->add_option("--config", common.config, "Run configuration (JSON)");
    sub->add_option("--seed", common.seed, "Overrides the config seed");
    sub->add_option("--out", common.out, "Output path (default: stdout)");
    if (manifest) sub->add_option("--manifest", common.manifest, "Dataset manifest (JSON-Lines)");
  };

  std::string in, modality, kind, meta_path;
  double degree = 0.0;
  auto* perturb_cmd = app.add_subcommand("perturb", "Apply one perturbation to one content file");
  add_common(perturb_cmd, false);
  perturb_cmd->add_option("--in", in, "Input content")->required();
  perturb_cmd->add_option("--modality", modality, "Input modality")->required();
  perturb_cmd->add_option("--kind", kind, "Perturbation kind")->required();
  perturb_cmd->add_option("--degree", degree, "Degree in [0, 1]")->required();
  perturb_cmd->add_option("--meta", meta_path, "Write run metadata JSON here");

  std::string text;
  std::vector<std::string> attach, ids;
  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate multimodal semantic uncertainty");
  add_common(estimate_cmd, true);
  estimate_cmd->add_option("--text", text, "Prompt text");
  estimate_cmd->add_option("--attach", attach, "Attachment as modality=path");
  estimate_cmd->add_option("--id", ids, "Manifest ids to estimate");

  auto* detect_cmd = app.add_subcommand("detect", "Hallucination detection over a manifest");
  add_common(detect_cmd, true);

  std::string records_path;
  auto* mitigate_cmd = app.add_subcommand("mitigate", "Revise the most uncertain answers");
  add_common(mitigate_cmd, true);
  mitigate_cmd->add_option("--records", records_path, "Detection output to reuse");

  auto* cot_cmd = app.add_subcommand("cot", "Uncertainty-aware chain of thought");
  add_common(cot_cmd, true);
  cot_cmd->add_option("--id", ids, "Manifest ids to run");

  std::vector<double> sigmas{0.01, 0.1, 1.0, 10.0}, sensitivity;
  std::size_t trials = 100000;
  double cubic = 0.0;
  int threads = 1;
  auto* prop_cmd = app.add_subcommand("prop-check", "Check D_rms proportional to sigma");
  add_common(prop_cmd, false);
  prop_cmd->add_option("--sigmas", sigmas, "Comma-separated sigmas")->delimiter(',');
  prop_cmd->add_option("--trials", trials, "Trials per sigma");
  prop_cmd->add_option("--sensitivity", sensitivity, "Comma-separated a vector")->delimiter(',');
  prop_cmd->add_option("--cubic", cubic, "Cubic nonlinearity coefficient");
  prop_cmd->add_option("--threads", threads, "Worker threads");

  std::string csv;
  std::optional<std::size_t> bins;
  auto* report_cmd = app.add_subcommand("report", "Metrics over detection records");
  add_common(report_cmd, false);
  report_cmd->add_option("records", in, "Detection records (JSON-Lines)")->required();
  report_cmd->add_option("--csv", csv, "Write reliability bins as CSV");
  report_cmd->add_option("--bins", bins, "Bin count (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kOk : kFatal;
  }

  try {
    if (perturb_cmd->parsed()) return run_perturb(common, in, modality, kind, degree, meta_path);
    if (estimate_cmd->parsed()) return run_estimate(common, text, attach, ids);
    if (detect_cmd->parsed()) return run_detect(common);
    if (mitigate_cmd->parsed()) return run_mitigate(common, records_path);
    if (cot_cmd->parsed()) return run_cot(common, ids);
    if (prop_cmd->parsed()) return run_prop_check(common, sigmas, trials, sensitivity, cubic, threads);
    if (report_cmd->parsed()) return run_report(common, in, csv, bins);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kFatal;
  }
  return kFatal;
}
