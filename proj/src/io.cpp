#include "granulation/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace granulation::io {

using nlohmann::json;

IoError::IoError(std::filesystem::path path, const std::string& what)
    : std::runtime_error(path.string() + ": " + what), path_(std::move(path)) {}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << std::setprecision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

}  // namespace

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

void write_run_csv(const std::filesystem::path& path, const harness::RunRecord& run) {
  auto out = open_out(path);
  out << kRunCsvHeader << '\n';
  for (const auto& r : run.steps) {
    out << r.time << ',' << r.s_f << ',' << r.c_f;
    for (double v : r.state.values) out << ',' << v;
    out << ',' << r.ratios.mean_drug << ',' << r.ratios.mean_mass << ',' << r.ratios.drug_second
        << '\n';
  }
  finish(out, path);
}

std::vector<harness::StepRecord> read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) throw IoError(path, "unexpected header");
  std::vector<harness::StepRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError(path, "bad number on line " + std::to_string(lineno));
      }
    }
    if (cells.size() != 15) throw IoError(path, "expected 15 columns on line " + std::to_string(lineno));
    harness::StepRecord r;
    r.time = cells[0];
    r.s_f = cells[1];
    r.c_f = cells[2];
    std::copy(cells.begin() + 3, cells.begin() + 12, r.state.values.begin());
    r.ratios = {cells[12], cells[13], cells[14]};
    rows.push_back(r);
  }
  return rows;
}

void write_histogram_csv(const std::filesystem::path& path, const harness::Histogram& h) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  finish(out, path);
}

void write_diagnostics_jsonl(const std::filesystem::path& path,
                             const std::vector<control::StepDiagnostics>& diagnostics) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < diagnostics.size(); ++k) {
    json j = diagnostics[k];
    j["step"] = k;
    out << j.dump() << '\n';
  }
  finish(out, path);
}

void write_oracle_csv(const std::filesystem::path& path,
                      const std::vector<std::vector<cnmc::Snapshot>>& replicates,
                      const std::vector<std::uint64_t>& seeds, std::size_t n_particles) {
  auto out = open_out(path);
  out << "replicate,seed,n_particles,time,m00,m10,m01,m11,m20,m02,m12,m21,m22\n";
  for (std::size_t r = 0; r < replicates.size(); ++r)
    for (const auto& snap : replicates[r]) {
      out << r << ',' << seeds[r] << ',' << n_particles << ',' << snap.time;
      for (double v : snap.moments.values) out << ',' << v;
      out << '\n';
    }
  finish(out, path);
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace granulation::io
