#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdt/eval.hpp"

namespace mdt {

enum class Method {
  kClassicalOracle,
  kStateDependentOracle,
  kStateConditionedDecode,
};

Method parse_method(const std::string& name);
std::string method_name(Method m);        // config token
std::string method_row_label(Method m);   // table row label

struct CellResult {
  EditCounts counts;
  double isolated_sum = 0.0;   // sum of isolated-reliable counts
  std::uint64_t utterances = 0;

  double isolated_mean() const {
    return utterances ? isolated_sum / static_cast<double>(utterances) : 0.0;
  }
};

struct ExperimentReport {
  std::vector<double> snrs_db;   // column order (clean first by convention)
  std::vector<Method> methods;
  // accuracy table indexed by (method, snr)
  std::map<std::pair<int, int>, CellResult> cells;        // pooled over noises
  std::map<std::string, std::map<std::pair<int, int>, CellResult>> by_noise;
  std::size_t s_total = 0;
  int n_mel = 0;
  std::size_t train_entries = 0;
  std::size_t test_entries = 0;

  const CellResult& cell(int method_idx, int snr_idx) const;
  CellResult& cell(int method_idx, int snr_idx);
};

// accuracy rounded to one decimal, the precision the tables report
double round1(double v);

std::string hypothesis_count_line(std::size_t s_total, int n_mel);

// (a) aligned text table, (b) csv with one row per (snr, method, metric),
// (c) per-method (snr, accuracy) columns for plotting (finite SNRs only)
void write_report_txt(const std::filesystem::path& path,
                      const ExperimentReport& report);
void write_report_csv(const std::filesystem::path& path,
                      const ExperimentReport& report);
void write_curves_dat(const std::filesystem::path& path,
                      const ExperimentReport& report);

}  // namespace mdt
