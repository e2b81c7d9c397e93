#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <string>

// Runs the cfsdcn executable (path baked in at build time) inside `dir` with
// stdout and stderr captured to files there.

namespace cfsdcn::testing {

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

inline CliRun run_cli(const std::filesystem::path& dir, std::initializer_list<std::string> args) {
  std::string cmd = "cd " + shell_quote(dir.string()) + " && " + shell_quote(CFSDCN_CLI);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >cli_stdout.txt 2>cli_stderr.txt";
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(dir / "cli_stdout.txt");
  r.err = slurp(dir / "cli_stderr.txt");
  return r;
}

}  // namespace cfsdcn::testing
