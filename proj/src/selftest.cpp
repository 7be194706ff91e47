#include <cmath>
#include <functional>
#include <ostream>

#include "mousse/checkpoint.hpp"
#include "mousse/harness.hpp"
#include "mousse/precond.hpp"
#include "mousse/random.hpp"
#include "mousse/sched.hpp"
#include "mousse/spectral.hpp"

namespace mousse {

int run_selftest(std::ostream& out) {
  int failures = 0;
  auto check = [&](const char* name, const std::function<bool()>& fn) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      out << "  error: " << e.what() << '\n';
    }
    out << (ok ? "ok    " : "FAIL  ") << name << '\n';
    if (!ok) ++failures;
  };

  check("sym_eig reconstructs a random SPD matrix", [] {
    const Matrix a = rand_matrix(12, 12, 1);
    const Matrix spd = a * a.transpose();
    const auto e = sym_eig(spd);
    return (reconstruct(e) - spd).norm() <= 1e-10 * spd.norm();
  });

  check("convergent Newton-Schulz matches the SVD polar factor", [] {
    const Matrix g = rand_matrix(8, 12, 2, Conditioned{10.0});
    const Matrix ns = msign_ns(g, NsConfig::convergent(30));
    return (ns - msign_exact(g)).norm() <= 1e-6;
  });

  check("trace normalization gives trace dim", [] {
    const Matrix a = rand_matrix(6, 6, 3);
    return std::abs(trace_normalize(Matrix(a * a.transpose()), 0.0).trace() - 6.0) <= 1e-12;
  });

  check("whiten then identity-scaled unwhiten is a rotation round trip", [] {
    PrecondConfig pc;
    pc.alpha = 0.0;
    KroneckerStats<double> stats(5, 7, pc);
    stats.update(rand_matrix(5, 7, 4));
    stats.refresh();
    const Matrix m = rand_matrix(5, 7, 5);
    return (stats.unwhiten(stats.whiten(m)) - m).norm() <= 1e-12 * m.norm();
  });

  check("checkpoint serialization round-trips", [] {
    Checkpoint ck;
    ck.put("m", rand_matrix(3, 4, 6));
    ck.put_scalar("s", 0.1);
    const Checkpoint back = Checkpoint::deserialize(ck.serialize());
    return back.get("m") == ck.get("m") && back.get_scalar("s") == 0.1;
  });

  check("cosine schedule hits its endpoints", [] {
    ScheduleSpec s;
    s.kind = ScheduleKind::cosine;
    s.total_steps = 100;
    s.peak_lr = 1e-2;
    s.final_lr = 1e-4;
    return lr_at(s, 0) == 0.0 && lr_at(s, s.warmup_steps()) == 1e-2 && lr_at(s, 100) == 1e-4;
  });

  out << (failures == 0 ? "all checks passed" : "some checks failed") << '\n';
  return failures;
}

}  // namespace mousse
