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

#include "mmuq/config.hpp"

#include <array>
#include <functional>
#include <initializer_list>

#include "mmuq/error.hpp"

namespace mmuq {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ptr, const std::string& why) {
  throw Error(ErrorCode::kConfigError, (ptr.empty() ? "/" : ptr) + ": " + why);
}

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) fail(ptr, "must be an object");
}

void check_keys(const json& obj, const std::string& ptr,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) fail(ptr + "/" + key, "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const char* key, const std::string& ptr, double def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number()) fail(ptr + "/" + key, "must be a number");
  return v->get<double>();
}

long long get_int(const json& obj, const char* key, const std::string& ptr, long long def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_integer()) fail(ptr + "/" + key, "must be an integer");
  return v->get<long long>();
}

std::string get_string(const json& obj, const char* key, const std::string& ptr,
                       const std::string& def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_string()) fail(ptr + "/" + key, "must be a string");
  return v->get<std::string>();
}

bool is_env_name(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Inlines "mock_file" so the canonical document (and its hash) captures the
// script contents.
// Literal integers built in code are signed even when non-negative.
bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

void inline_mock_files(json& doc, const std::filesystem::path& base_dir) {
  auto roles = doc.find("roles");
  if (roles == doc.end() || !roles->is_object()) return;
  for (auto& [role, b] : roles->items()) {
    if (!b.is_object()) continue;
    auto mf = b.find("mock_file");
    if (mf == b.end()) continue;
    const std::string ptr = "/roles/" + role + "/mock_file";
    if (!mf->is_string()) fail(ptr, "must be a string");
    if (b.contains("mock")) fail(ptr, "give either mock or mock_file, not both");
    const std::filesystem::path p = base_dir / mf->get<std::string>();
    json script;
    try {
      script = json::parse(read_file(p));
    } catch (const json::parse_error& e) {
      fail(ptr, std::string("invalid JSON in ") + p.string() + ": " + e.what());
    } catch (const Error& e) {
      fail(ptr, e.detail());
    }
    b.erase("mock_file");
    b["mock"] = std::move(script);
  }
}

BackendConfig parse_backend(const json& j, const std::string& ptr, std::uint64_t run_seed) {
  require_object(j, ptr);
  check_keys(j, ptr,
             {"kind", "base_url", "model_name", "api_key_env", "temperature", "timeout",
              "max_inflight", "retry", "program", "args", "mock", "seed",
              "judge_template", "caption_prompt", "rephrase_template"});
  BackendConfig cfg;
  const json* kind = find(j, "kind");
  if (!kind) fail(ptr + "/kind", "required");
  const std::string k = kind->is_string() ? kind->get<std::string>() : "";
  if (k == "http_chat") {
    cfg.kind = BackendKind::kHttpChat;
  } else if (k == "command") {
    cfg.kind = BackendKind::kCommand;
  } else if (k == "mock") {
    cfg.kind = BackendKind::kMock;
  } else {
    fail(ptr + "/kind", "must be one of http_chat, command, mock");
  }
  cfg.base_url = get_string(j, "base_url", ptr, "");
  cfg.model_name = get_string(j, "model_name", ptr, "");
  cfg.api_key_env = get_string(j, "api_key_env", ptr, "");
  if (!cfg.api_key_env.empty() && !is_env_name(cfg.api_key_env)) {
    fail(ptr + "/api_key_env", "must name an environment variable, not hold a key");
  }
  cfg.temperature = get_number(j, "temperature", ptr, cfg.temperature);
  cfg.timeout_s = get_number(j, "timeout", ptr, cfg.timeout_s);
  cfg.max_inflight = static_cast<int>(get_int(j, "max_inflight", ptr, cfg.max_inflight));
  if (const json* r = find(j, "retry")) {
    const std::string rp = ptr + "/retry";
    require_object(*r, rp);
    check_keys(*r, rp, {"max_attempts", "backoff_base_ms"});
    cfg.retry.max_attempts = static_cast<int>(get_int(*r, "max_attempts", rp, cfg.retry.max_attempts));
    cfg.retry.backoff_base_ms =
        static_cast<int>(get_int(*r, "backoff_base_ms", rp, cfg.retry.backoff_base_ms));
  }
  cfg.program = get_string(j, "program", ptr, "");
  if (const json* a = find(j, "args")) {
    if (!a->is_array()) fail(ptr + "/args", "must be an array of strings");
    for (std::size_t i = 0; i < a->size(); ++i) {
      if (!(*a)[i].is_string()) fail(ptr + "/args/" + std::to_string(i), "must be a string");
      cfg.args.push_back((*a)[i].get<std::string>());
    }
  }
  if (const json* m = find(j, "mock")) {
    require_object(*m, ptr + "/mock");
    cfg.mock = *m;
  }
  if (const json* s = find(j, "seed")) {
    if (!is_non_negative_integer(*s)) fail(ptr + "/seed", "must be a non-negative integer");
    cfg.seed = s->get<std::uint64_t>();
  } else {
    cfg.seed = run_seed;
  }
  cfg.judge_template = get_string(j, "judge_template", ptr, cfg.judge_template);
  cfg.caption_prompt = get_string(j, "caption_prompt", ptr, cfg.caption_prompt);
  cfg.rephrase_template = get_string(j, "rephrase_template", ptr, cfg.rephrase_template);
  try {
    validate(cfg);
  } catch (const Error& e) {
    // validate() names the field relative to the backend object.
    const std::string& msg = e.detail();
    const auto colon = msg.find(": ");
    if (colon == std::string::npos) fail(ptr, msg);
    fail(ptr + "/" + msg.substr(0, colon), msg.substr(colon + 2));
  }
  return cfg;
}

PerturbationPlan parse_plan(const json& j, const std::string& ptr, std::uint64_t seed) {
  PerturbationPlan plan;
  plan.seed = seed;
  require_object(j, ptr);
  check_keys(j, ptr, {"sample_count", "pairing_order", "kinds", "params"});
  plan.sample_count = static_cast<int>(get_int(j, "sample_count", ptr, plan.sample_count));
  if (plan.sample_count < 1) fail(ptr + "/sample_count", "must be >= 1");
  try {
    plan.pairing = parse_pairing(get_string(j, "pairing_order", ptr, "progressive"));
  } catch (const Error&) {
    fail(ptr + "/pairing_order", "must be one of progressive, random, shifted");
  }
  if (const json* kinds = find(j, "kinds")) {
    require_object(*kinds, ptr + "/kinds");
    for (const auto& [mod, list] : kinds->items()) {
      const std::string mp = ptr + "/kinds/" + mod;
      Modality m;
      try {
        m = parse_modality(mod);
      } catch (const Error&) {
        fail(mp, "unknown modality");
      }
      if (!list.is_array()) fail(mp, "must be an array of kind names");
      std::vector<PerturbKind> chain;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string ip = mp + "/" + std::to_string(i);
        if (!list[i].is_string()) fail(ip, "must be a string");
        try {
          chain.push_back(parse_kind(m, list[i].get<std::string>()));
        } catch (const Error& e) {
          fail(ip, e.detail());
        }
      }
      plan.kinds[m] = std::move(chain);
    }
  }
  if (const json* p = find(j, "params")) {
    const std::string pp = ptr + "/params";
    require_object(*p, pp);
    auto& P = plan.params;
    const std::array<std::pair<const char*, double*>, 14> fields{{
        {"max_rotation_deg", &P.max_rotation_deg},
        {"brightness_gain", &P.brightness_gain},
        {"max_blur_sigma_px", &P.max_blur_sigma_px},
        {"volume_gain", &P.volume_gain},
        {"max_shift_fraction", &P.max_shift_fraction},
        {"pitch_factor", &P.pitch_factor},
        {"timbre_tilt", &P.timbre_tilt},
        {"max_frame_drop_fraction", &P.max_frame_drop_fraction},
        {"max_crop_fraction", &P.max_crop_fraction},
        {"speed_gain", &P.speed_gain},
        {"max_subsample_fraction", &P.max_subsample_fraction},
        {"jitter_bbox_fraction", &P.jitter_bbox_fraction},
        {"max_rotation3d_deg", &P.max_rotation3d_deg},
        {"scale_gain", &P.scale_gain},
    }};
    for (const auto& [key, value] : p->items()) {
      bool known = false;
      for (const auto& [name, slot] : fields) {
        if (key != name) continue;
        known = true;
        if (!value.is_number()) fail(pp + "/" + key, "must be a number");
        *slot = value.get<double>();
        if (!(*slot >= 0.0)) fail(pp + "/" + key, "must be >= 0");
      }
      if (!known) fail(pp + "/" + key, "unknown key");
    }
    if (P.max_frame_drop_fraction > 1.0) fail(pp + "/max_frame_drop_fraction", "must be <= 1");
    if (P.max_crop_fraction >= 1.0) fail(pp + "/max_crop_fraction", "must be < 1");
    if (P.max_subsample_fraction >= 1.0) fail(pp + "/max_subsample_fraction", "must be < 1");
    if (P.max_shift_fraction > 1.0) fail(pp + "/max_shift_fraction", "must be <= 1");
    if (P.pitch_factor >= 1.0) fail(pp + "/pitch_factor", "must be < 1");
  }
  return plan;
}

}  // namespace

RunConfig parse_run_config(const json& input, const std::filesystem::path& base_dir) {
  require_object(input, "");
  json doc = input;
  check_keys(doc, "",
             {"seed", "parallelism", "roles", "plan", "clustering", "metrics", "tasks"});
  inline_mock_files(doc, base_dir);

  RunConfig cfg;
  const json* seed = find(doc, "seed");
  if (!seed) fail("/seed", "required");
  if (!is_non_negative_integer(*seed)) fail("/seed", "must be a non-negative integer");
  cfg.seed = seed->get<std::uint64_t>();

  TaskOptions& opt = cfg.options;
  opt.parallelism = static_cast<int>(get_int(doc, "parallelism", "", 1));
  if (opt.parallelism < 1) fail("/parallelism", "must be >= 1");

  const json* roles = find(doc, "roles");
  if (!roles) fail("/roles", "required");
  require_object(*roles, "/roles");
  check_keys(*roles, "/roles", {"responder", "captioner", "judge", "grader"});
  const json* responder = find(*roles, "responder");
  if (!responder) fail("/roles/responder", "required");
  cfg.roles.responder = parse_backend(*responder, "/roles/responder", cfg.seed);
  if (const json* b = find(*roles, "captioner")) {
    cfg.roles.captioner = parse_backend(*b, "/roles/captioner", cfg.seed);
  }
  if (const json* b = find(*roles, "judge")) {
    cfg.roles.judge = parse_backend(*b, "/roles/judge", cfg.seed);
  }
  if (const json* b = find(*roles, "grader")) {
    cfg.roles.grader = parse_backend(*b, "/roles/grader", cfg.seed);
  }

  opt.plan = parse_plan(doc.value("plan", json::object()), "/plan", cfg.seed);

  try {
    opt.clustering = parse_clustering(get_string(doc, "clustering", "", "semantic"));
  } catch (const Error&) {
    fail("/clustering", "must be semantic or lexical");
  }
  if (opt.clustering == ClusteringMode::kSemantic && !cfg.roles.judge) {
    fail("/roles/judge", "required for semantic clustering");
  }

  if (const json* m = find(doc, "metrics")) {
    require_object(*m, "/metrics");
    check_keys(*m, "/metrics", {"bin_count"});
    const long long bins = get_int(*m, "bin_count", "/metrics", 10);
    if (bins < 1) fail("/metrics/bin_count", "must be >= 1");
    cfg.bin_count = static_cast<std::size_t>(bins);
  }

  if (const json* t = find(doc, "tasks")) {
    require_object(*t, "/tasks");
    check_keys(*t, "/tasks", {"top_fraction", "max_steps", "grader", "initial_temperature"});
    opt.top_fraction = get_number(*t, "top_fraction", "/tasks", opt.top_fraction);
    if (!(opt.top_fraction > 0.0 && opt.top_fraction <= 1.0)) {
      fail("/tasks/top_fraction", "must be in (0, 1]");
    }
    opt.max_steps = static_cast<int>(get_int(*t, "max_steps", "/tasks", opt.max_steps));
    if (opt.max_steps < 1) fail("/tasks/max_steps", "must be >= 1");
    const std::string grader = get_string(*t, "grader", "/tasks", "exact");
    if (grader == "exact") {
      opt.grader = GraderKind::kExact;
    } else if (grader == "backend") {
      opt.grader = GraderKind::kBackend;
      if (!cfg.roles.grader && !cfg.roles.judge) {
        fail("/tasks/grader", "backend grading needs a grader or judge role");
      }
    } else {
      fail("/tasks/grader", "must be exact or backend");
    }
    opt.initial_temperature =
        get_number(*t, "initial_temperature", "/tasks", opt.initial_temperature);
    if (!(opt.initial_temperature >= 0.0)) fail("/tasks/initial_temperature", "must be >= 0");
  }

  cfg.canonical = std::move(doc);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, "/: invalid JSON in " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMissingFile) throw;
    throw Error(ErrorCode::kConfigError, "/: " + e.detail());
  }
  return parse_run_config(doc, path.parent_path());
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  json doc = cfg.canonical;
  doc["seed"] = seed;
  cfg = parse_run_config(doc, {});
}

std::string config_hash(const RunConfig& cfg) {
  return hex64(fnv1a(cfg.canonical.dump()));
}

json run_meta(const RunConfig& cfg) {
  return {{"config_hash", config_hash(cfg)},
          {"seed", cfg.seed},
          {"tool_version", std::string(kToolVersion)}};
}

}  // namespace mmuq
