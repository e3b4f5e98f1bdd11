#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mgnet/dataset.hpp"
#include "mgnet/model.hpp"
#include "mgnet/training.hpp"

namespace mgnet::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitArgument = 2,
  kExitData = 3,
  kExitDivergence = 4,
};

struct KeySpec {
  std::string name;
  std::string default_value;
  std::string help;
};

// Flat key=value configuration. A file is read first, command-line flags
// then override individual keys. Unknown keys are rejected.
class CliConfig {
 public:
  static const std::vector<KeySpec>& keys();

  CliConfig();

  /// Lines are `key=value`; blank lines and lines starting with '#' are skipped.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::string& str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::size_t> size_list(const std::string& key) const;

  MgNetConfig model_config() const;
  TrainConfig train_config() const;
  SynthSpec synth_spec() const;
  Aggregation aggregation() const;

  /// `seed_model=<n>` etc., with ` # default` appended to seeds not given.
  std::string seed_header() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

/// Entry point shared by the mgnet3d tool and the tests. Returns an exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit code for an exception thrown by the library.
int exit_code_for(const std::exception& e);

std::string params_report(const MgNetConfig& config);

}  // namespace mgnet::cli
