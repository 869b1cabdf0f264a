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

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "mmuq/backends.hpp"
#include "mmuq/error.hpp"

extern char** environ;

namespace mmuq {
namespace fs = std::filesystem;
namespace {

// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("mmuq-cmd-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::optional<Modality> modality_for_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png" || ext == ".ppm") return Modality::kImage;
  if (ext == ".wav") return Modality::kAudio;
  if (ext == ".json") return Modality::kVideo;
  if (ext == ".xyz") return Modality::kPointCloud;
  return std::nullopt;
}

}  // namespace

CommandBackend::CommandBackend(BackendConfig cfg) : Backend(std::move(cfg)) {}

CommandBackend::Result CommandBackend::run_process(
    const std::vector<std::string>& argv, double timeout_s) {
  int fds[2];
  if (::pipe(fds) != 0) {
    throw Error(ErrorCode::kBackendError, std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw Error(ErrorCode::kBackendError,
                "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  Result result;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  bool timed_out = false;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - std::chrono::steady_clock::now())
                          .count();
    if (left <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1000)));
    if (pr < 0 && errno == EINTR) continue;
    if (pr == 0) continue;
    const ssize_t n = ::read(fds[0], buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    result.stdout_text.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fds[0]);
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out) {
    throw Error(ErrorCode::kTransportError,
                "'" + argv[0] + "' timed out after " + std::to_string(timeout_s) + " s");
  }
  result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

std::string CommandBackend::invoke(const fs::path& content_path,
                                   const fs::path& prompt_path) {
  std::vector<std::string> argv{config().program};
  argv.insert(argv.end(), config().args.begin(), config().args.end());
  argv.push_back(content_path.string());
  argv.push_back(prompt_path.string());
  Result r;
  {
    InflightLimiter::Slot slot(limiter());
    r = run_process(argv, config().timeout_s);
  }
  if (r.exit_status != 0) {
    throw Error(ErrorCode::kBackendError,
                "'" + config().program + "' exited with status " +
                    std::to_string(r.exit_status));
  }
  return trim(std::move(r.stdout_text));
}

ModelResponse CommandBackend::do_respond(const PromptBundle& bundle,
                                         const RequestContext& /*ctx*/) {
  ScratchDir dir;
  const fs::path prompt_path = dir.path() / "prompt.txt";
  write_file(prompt_path, bundle.text.text);

  // No attachment: the prompt doubles as content. One: that file. Several:
  // a bundle JSON in the manifest-line shape.
  fs::path content_path = prompt_path;
  if (bundle.attachments.size() == 1) {
    const auto& [m, c] = *bundle.attachments.begin();
    content_path = dir.path() / ("content" + std::string(default_extension(m)));
    save_content(c, content_path);
  } else if (bundle.attachments.size() > 1) {
    nlohmann::json j{{"text", bundle.text.text}, {"attachments", nlohmann::json::array()}};
    for (const auto& [m, c] : bundle.attachments) {
      const fs::path p = dir.path() / (std::string(modality_name(m)) +
                                       std::string(default_extension(m)));
      save_content(c, p);
      j["attachments"].push_back({{"modality", modality_name(m)}, {"path", p.string()}});
    }
    content_path = dir.path() / "bundle.json";
    write_file(content_path, j.dump());
  }

  const std::string out = invoke(content_path, prompt_path);
  ModelResponse r;
  r.raw = {{"backend", "command"}, {"stdout", out}};
  std::error_code ec;
  if (!out.empty() && out.find('\n') == std::string::npos &&
      fs::is_regular_file(out, ec)) {
    if (const auto m = modality_for_extension(out)) {
      r.outputs.emplace(*m, load_content(out, *m));
      return r;
    }
  }
  r.outputs.emplace(Modality::kText, TextContent{out});
  return r;
}

std::string CommandBackend::do_caption(const Content& content) {
  ScratchDir dir;
  const Modality m = modality_of(content);
  const fs::path content_path = dir.path() / ("content" + std::string(default_extension(m)));
  save_content(content, content_path);
  const fs::path prompt_path = dir.path() / "prompt.txt";
  write_file(prompt_path, config().caption_prompt);
  return invoke(content_path, prompt_path);
}

bool CommandBackend::do_judge(const std::string& question, const std::string& a,
                              const std::string& b) {
  ScratchDir dir;
  const fs::path prompt_path = dir.path() / "prompt.txt";
  write_file(prompt_path, fill_template(config().judge_template,
                                        {{"Q", question}, {"A", a}, {"B", b}}));
  return parse_verdict(invoke(prompt_path, prompt_path));
}

}  // namespace mmuq
