#pragma once

// Subprocess adapter for an external codec. The command template is run by
// /bin/sh with these placeholders substituted by quoted paths / values:
//   {input}      8-bit PGM (still image) or Y4M 4:2:0 (video) to compress
//   {bitstream}  where the codec must leave its compressed file
//   {output}     where the codec must leave the decoded PGM / Y4M
//   {qp}         theta
// Temp space comes from $PRECOMP_TMP (or the system temp directory). It is
// removed on success and kept on failure; the error names the directory.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <thread>

#include "precomp/codec.hpp"
#include "precomp/signal_io.hpp"

extern char** environ;

namespace precomp {

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

inline std::filesystem::path make_temp_dir() {
  static std::atomic<unsigned> counter{0};
  const char* env = std::getenv("PRECOMP_TMP");
  const std::filesystem::path root = env && *env ? std::filesystem::path(env) : std::filesystem::temp_directory_path();
  std::filesystem::create_directories(root);
  for (;;) {
    auto dir = root / ("precomp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

struct ProcessOutcome {
  bool timed_out = false;
  int exit_code = -1;
};

inline ProcessOutcome run_shell(const std::string& command, double timeout_seconds) {
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", nullptr, &attr, argv, environ);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw CodecError("could not spawn /bin/sh: " + std::string(std::strerror(rc)));

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  for (;;) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return {true, -1};
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return {false, WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status)};
}

}  // namespace detail

/// Round trip through an external codec. Input is clamped to [0,1] and
/// quantized to 8 bits on the way out; that loss belongs to this adapter.
inline CodecResult external_roundtrip(const SignalBuffer& signal, const CodecParams& params) {
  check_theta(params.theta);
  if (params.command_template.empty()) throw CodecError("external backend selected without a command template");
  const bool video = signal.geometry().frames > 1;
  const auto dir = detail::make_temp_dir();
  const auto input = dir / (video ? "input.y4m" : "input.pgm");
  const auto output = dir / (video ? "output.y4m" : "output.pgm");
  const auto bitstream = dir / "bitstream.bin";
  const auto log = dir / "codec.log";

  auto fail = [&](const std::string& why) -> CodecError {
    std::string tail;
    std::ifstream in(log);
    if (in) tail.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (tail.size() > 2000) tail = tail.substr(tail.size() - 2000);
    return CodecError("external codec: " + why + " (diagnostics kept in " + dir.string() + ")" +
                          (tail.empty() ? "" : "\n" + tail),
                      dir.string());
  };

  if (video) {
    write_y4m(signal, input, Y4mChroma::c420);
  } else {
    write_pgm(signal, input);
  }

  std::string cmd = params.command_template;
  cmd = detail::substitute(cmd, "{input}", detail::shell_quote(input.string()));
  cmd = detail::substitute(cmd, "{bitstream}", detail::shell_quote(bitstream.string()));
  cmd = detail::substitute(cmd, "{output}", detail::shell_quote(output.string()));
  cmd = detail::substitute(cmd, "{qp}", std::to_string(params.theta));
  const std::string wrapped = "cd " + detail::shell_quote(dir.string()) + " && ( " + cmd + " ) > " +
                              detail::shell_quote(log.string()) + " 2>&1";

  const auto outcome = detail::run_shell(wrapped, params.timeout_seconds);
  if (outcome.timed_out) throw fail("timed out after " + std::to_string(params.timeout_seconds) + " s");
  if (outcome.exit_code != 0) throw fail("command exited with status " + std::to_string(outcome.exit_code));
  if (!std::filesystem::exists(bitstream)) throw fail("no bitstream written");

  SignalBuffer decoded;
  try {
    decoded = video ? read_y4m(output) : read_pgm(output);
  } catch (const Error& e) {
    throw fail(std::string("undecodable output: ") + e.what());
  }
  if (decoded.geometry() != signal.geometry()) {
    throw fail("decoded geometry " + to_string(decoded.geometry()) + " does not match input " +
               to_string(signal.geometry()));
  }

  CodecResult result;
  std::ifstream bs(bitstream, std::ios::binary);
  result.stream.payload.assign(std::istreambuf_iterator<char>(bs), std::istreambuf_iterator<char>());
  result.stream.bit_count = result.stream.payload.size() * 8;
  result.stream.params = params;
  result.decompressed = std::move(decoded);
  bs.close();
  std::filesystem::remove_all(dir);
  return result;
}

/// CompressDecompress_theta for either backend.
inline CodecResult compress_decompress(const SignalBuffer& signal, const CodecParams& params) {
  if (params.backend == CodecBackendKind::external) return external_roundtrip(signal, params);
  CodecResult result;
  result.stream = builtin_encode(signal, params);
  result.decompressed = builtin_decode(result.stream);
  return result;
}

}  // namespace precomp
