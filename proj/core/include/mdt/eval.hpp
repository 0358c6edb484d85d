#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mdt {

struct EditCounts {
  std::uint64_t n_ref = 0;
  std::uint64_t sub = 0;
  std::uint64_t del = 0;
  std::uint64_t ins = 0;

  // 100 * (N - S - D - I) / N; can be negative when insertions dominate
  double accuracy() const;
  EditCounts& operator+=(const EditCounts& o);
};

// Levenshtein alignment over words, unit costs. Traceback prefers
// match/substitution over deletion over insertion so the S/D/I split is
// deterministic.
template <typename Word>
EditCounts word_edit_counts(const std::vector<Word>& ref,
                            const std::vector<Word>& hyp) {
  const std::size_t R = ref.size();
  const std::size_t H = hyp.size();
  std::vector<std::uint32_t> d((R + 1) * (H + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& {
    return d[i * (H + 1) + j];
  };
  for (std::size_t i = 0; i <= R; ++i) at(i, 0) = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= H; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const std::uint32_t match_cost =
          at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u);
      const std::uint32_t del_cost = at(i - 1, j) + 1u;
      const std::uint32_t ins_cost = at(i, j - 1) + 1u;
      at(i, j) = std::min(match_cost, std::min(del_cost, ins_cost));
    }
  }
  EditCounts counts;
  counts.n_ref = R;
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u)) {
      if (!(ref[i - 1] == hyp[j - 1])) ++counts.sub;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1u) {
      ++counts.del;
      --i;
    } else {
      ++counts.ins;
      --j;
    }
  }
  return counts;
}

template <typename Word>
EditCounts aggregate_edit_counts(
    const std::vector<std::vector<Word>>& refs,
    const std::vector<std::vector<Word>>& hyps) {
  if (refs.size() != hyps.size()) {
    throw std::invalid_argument("ref/hyp list length mismatch");
  }
  if (refs.empty()) {
    throw std::invalid_argument("cannot score an empty reference set");
  }
  EditCounts total;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    total += word_edit_counts(refs[i], hyps[i]);
  }
  return total;
}

}  // namespace mdt
