// One line per acceptance criterion; exit status is nonzero if any fails.
#include <cstdio>
#include <exception>
#include <string>

#include "kmplab/verify.hpp"

int main() {
  int failed = 0;
  for (const auto& c : kmplab::criteria()) {
    kmplab::CriterionResult r;
    try {
      r = kmplab::run_criterion(c.id);
    } catch (const std::exception& e) {
      r.id = c.id;
      r.title = c.title;
      r.tolerance = c.tolerance;
      r.note = std::string("error: ") + e.what();
    }
    if (!r.pass) ++failed;
    std::string metrics;
    for (const auto& m : r.metrics) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s%s=%.6g", metrics.empty() ? "" : " ", m.first.c_str(), m.second);
      metrics += buf;
    }
    std::printf("[%s] %2d %s | tolerance: %s | %s | %.1fs\n", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(),
                r.tolerance.c_str(), metrics.c_str(), r.seconds);
    if (!r.note.empty()) std::printf("       %s\n", r.note.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(kmplab::criteria().size()) - failed,
              kmplab::criteria().size());
  return failed == 0 ? 0 : 1;
}
