#ifndef GRANULATION_IO_HPP_
#define GRANULATION_IO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "granulation/campaign.hpp"
#include "granulation/cnmc.hpp"

namespace granulation::io {

/// File could not be opened, written or parsed.
class IoError : public std::runtime_error {
 public:
  IoError(std::filesystem::path path, const std::string& what);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kRunCsvHeader =
    "time,s_f,c_f,m00,m10,m01,m11,m20,m02,m12,m21,m22,mean_drug,mean_mass,drug_second";

// Doubles are written with 17 significant digits, so reading back is exact.
void write_run_csv(const std::filesystem::path& path, const harness::RunRecord& run);
std::vector<harness::StepRecord> read_run_csv(const std::filesystem::path& path);

void write_histogram_csv(const std::filesystem::path& path, const harness::Histogram& h);

/// One JSON object per line, one line per controller move.
void write_diagnostics_jsonl(const std::filesystem::path& path,
                             const std::vector<control::StepDiagnostics>& diagnostics);

/// Columns: replicate,seed,n_particles,time,m00..m22.
void write_oracle_csv(const std::filesystem::path& path,
                      const std::vector<std::vector<cnmc::Snapshot>>& replicates,
                      const std::vector<std::uint64_t>& seeds, std::size_t n_particles);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// The output directory is created if missing.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace granulation::io

#endif  // GRANULATION_IO_HPP_
