#include "mdt/eval.hpp"

namespace mdt {

double EditCounts::accuracy() const {
  if (n_ref == 0) {
    throw std::invalid_argument("accuracy of an empty reference set");
  }
  const double errors = static_cast<double>(sub) + static_cast<double>(del) +
                        static_cast<double>(ins);
  return 100.0 * (static_cast<double>(n_ref) - errors) /
         static_cast<double>(n_ref);
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  n_ref += o.n_ref;
  sub += o.sub;
  del += o.del;
  ins += o.ins;
  return *this;
}

}  // namespace mdt
