#include "mdt/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "mdt/corpus.hpp"
#include "mdt/io_util.hpp"

namespace mdt {

Method parse_method(const std::string& name) {
  if (name == "classical_oracle") return Method::kClassicalOracle;
  if (name == "state_dependent_oracle") return Method::kStateDependentOracle;
  if (name == "state_conditioned_decode") {
    return Method::kStateConditionedDecode;
  }
  throw std::invalid_argument("unknown method `" + name + "`");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kClassicalOracle: return "classical_oracle";
    case Method::kStateDependentOracle: return "state_dependent_oracle";
    case Method::kStateConditionedDecode: return "state_conditioned_decode";
  }
  return "?";
}

std::string method_row_label(Method m) {
  switch (m) {
    case Method::kClassicalOracle: return "classical";
    case Method::kStateDependentOracle: return "state dep.";
    case Method::kStateConditionedDecode: return "state cond.";
  }
  return "?";
}

const CellResult& ExperimentReport::cell(int method_idx, int snr_idx) const {
  auto it = cells.find({method_idx, snr_idx});
  if (it == cells.end()) {
    throw std::invalid_argument("missing report cell");
  }
  return it->second;
}

CellResult& ExperimentReport::cell(int method_idx, int snr_idx) {
  return cells[{method_idx, snr_idx}];
}

double round1(double v) { return std::round(v * 10.0) / 10.0 + 0.0; }

std::string hypothesis_count_line(std::size_t s_total, int n_mel) {
  if (n_mel < 1 || n_mel > 62) {
    throw std::invalid_argument("band count out of range for 2^K");
  }
  const std::uint64_t hypotheses = 1ull << n_mel;
  std::ostringstream os;
  os << "mask hypotheses per frame: 2^" << n_mel << " = " << hypotheses
     << " theoretically possible masks; state-conditioned decoding evaluates "
     << "S_total = " << s_total << " (one per state)";
  return os.str();
}

namespace {

std::string fmt1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << (round1(v) + 0.0);
  return os.str();
}

std::string fmt_mean(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

void write_table(std::ostream& os, const ExperimentReport& r,
                 const std::map<std::pair<int, int>, CellResult>& cells,
                 bool isolated) {
  os << std::left << std::setw(13) << "method";
  for (double snr : r.snrs_db) {
    os << std::right << std::setw(8) << snr_to_string(snr);
  }
  os << "\n";
  for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
    os << std::left << std::setw(13) << method_row_label(r.methods[mi]);
    for (std::size_t si = 0; si < r.snrs_db.size(); ++si) {
      auto it = cells.find({static_cast<int>(mi), static_cast<int>(si)});
      if (it == cells.end()) {
        os << std::right << std::setw(8) << "-";
        continue;
      }
      const CellResult& c = it->second;
      os << std::right << std::setw(8)
         << (isolated ? fmt_mean(c.isolated_mean())
                      : fmt1(c.counts.accuracy()));
    }
    os << "\n";
  }
  if (!isolated) {
    // delta row only when both oracle-mask methods are present
    int ci = -1, si = -1;
    for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
      if (r.methods[mi] == Method::kClassicalOracle) ci = static_cast<int>(mi);
      if (r.methods[mi] == Method::kStateDependentOracle) {
        si = static_cast<int>(mi);
      }
    }
    if (ci >= 0 && si >= 0) {
      os << std::left << std::setw(13) << "delta acc.";
      for (std::size_t s = 0; s < r.snrs_db.size(); ++s) {
        auto itc = cells.find({ci, static_cast<int>(s)});
        auto its = cells.find({si, static_cast<int>(s)});
        if (itc == cells.end() || its == cells.end()) {
          os << std::right << std::setw(8) << "-";
          continue;
        }
        // difference of the reported (rounded) accuracies, so the row is
        // recomputable from the printed table exactly
        const double d = round1(its->second.counts.accuracy()) -
                         round1(itc->second.counts.accuracy());
        os << std::right << std::setw(8) << fmt1(d);
      }
      os << "\n";
    }
  }
}

}  // namespace

void write_report_txt(const std::filesystem::path& path,
                      const ExperimentReport& r) {
  std::ostringstream os;
  os << "missing-data oracle mask workbench\n";
  os << "==================================\n\n";
  os << "corpus: " << r.train_entries << " train entries, " << r.test_entries
     << " test entries\n";
  os << "model: S_total = " << r.s_total << " states, K = " << r.n_mel
     << " mel bands\n";
  os << hypothesis_count_line(r.s_total, r.n_mel) << "\n\n";

  os << "word accuracy (%)\n";
  write_table(os, r, r.cells, false);
  os << "\n";

  os << "mean isolated reliable cells per utterance\n";
  write_table(os, r, r.cells, true);

  if (!r.by_noise.empty()) {
    os << "\nper-noise word accuracy (%)\n";
    for (const auto& [noise, cells] : r.by_noise) {
      os << "[" << noise << "]\n";
      write_table(os, r, cells, false);
    }
  }
  write_text_file(path, os.str());
}

void write_report_csv(const std::filesystem::path& path,
                      const ExperimentReport& r) {
  std::ostringstream os;
  os << "snr_db,method,metric,value\n";
  for (std::size_t si = 0; si < r.snrs_db.size(); ++si) {
    for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
      const CellResult& c =
          r.cell(static_cast<int>(mi), static_cast<int>(si));
      const std::string prefix = snr_to_string(r.snrs_db[si]) + "," +
                                 method_name(r.methods[mi]) + ",";
      os << prefix << "accuracy," << fmt1(c.counts.accuracy()) << "\n";
      os << prefix << "ref_words," << c.counts.n_ref << "\n";
      os << prefix << "substitutions," << c.counts.sub << "\n";
      os << prefix << "deletions," << c.counts.del << "\n";
      os << prefix << "insertions," << c.counts.ins << "\n";
      os << prefix << "isolated_mean," << fmt_mean(c.isolated_mean()) << "\n";
    }
  }
  write_text_file(path, os.str());
}

void write_curves_dat(const std::filesystem::path& path,
                      const ExperimentReport& r) {
  std::vector<std::size_t> finite;
  for (std::size_t si = 0; si < r.snrs_db.size(); ++si) {
    if (std::isfinite(r.snrs_db[si])) finite.push_back(si);
  }
  std::sort(finite.begin(), finite.end(), [&](std::size_t a, std::size_t b) {
    return r.snrs_db[a] < r.snrs_db[b];
  });
  std::ostringstream os;
  os << "# word accuracy vs SNR, two columns per series";
  for (Method m : r.methods) os << " | " << method_row_label(m);
  os << "\n# finite SNRs only; the clean column is in report.txt\n";
  for (std::size_t si : finite) {
    bool first = true;
    for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
      const CellResult& c =
          r.cell(static_cast<int>(mi), static_cast<int>(si));
      if (!first) os << "  ";
      first = false;
      os << r.snrs_db[si] << " " << fmt1(c.counts.accuracy());
    }
    os << "\n";
  }
  write_text_file(path, os.str());
}

}  // namespace mdt
