// Runs one query through exact, base-quantized and approximate attention on a
// small synthetic workload and prints what each path selected.

#include <cstdio>
#include <memory>

#include "a3/a3.hpp"
#include "a3/harness/synthetic.hpp"

int main() {
  using namespace a3;
  const auto data = harness::gen_synthetic(64, 16, 4, 1, 7);
  const auto sched = make_schedule(64, 16, 4, 4);
  auto luts = std::make_shared<const ExpLutPair>(build_exp_luts(sched));
  const ApproxAttention attn(data.key, data.value, sched, luts, CycleParams{});

  const auto query = data.queries.row(0);
  const auto exact = reference::attention_exact(data.key, data.value, query);
  const auto base = attn.evaluate_base(query);
  const auto approx = attn.evaluate(query, SelectionConfig{32, 5.0, true});

  std::printf("planted rows:");
  for (RowId r : data.planted[0]) std::printf(" %u", r);
  std::printf("\ncandidates: %zu, survivors: %zu\nsurvivors:", approx.candidate_count,
              approx.survivor_count);
  for (RowId r : approx.survivors) std::printf(" %u", r);
  std::printf("\n\n%4s %10s %10s %10s\n", "col", "exact", "base", "approx");
  const auto b = base.output.to_real();
  const auto a = approx.output.to_real();
  for (std::size_t c = 0; c < exact.size(); ++c) {
    std::printf("%4zu %10.5f %10.5f %10.5f\n", c, exact[c], b[c], a[c]);
  }
  std::printf("\nbase cycles: latency %llu, approx cycles: latency %llu\n",
              static_cast<unsigned long long>(base_report(64, CycleParams{}).latency_cycles),
              static_cast<unsigned long long>(approx.cycles.latency_cycles));
}
