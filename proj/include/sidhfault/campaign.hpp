#pragma once

// Trial runners shared by the command-line tool, the demo and the acceptance
// checks. Each trial owns its generator, seeded from (campaign seed, index).

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "countermeasure.hpp"

namespace sidhfault {

// splitmix64 step; spreads (seed, index) over independent trial seeds.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct TrialReport {
    std::string param_set;
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    unsigned e3 = 0;
    bool success = false;
    std::size_t oracle_calls = 0;
    std::size_t trit_rounds = 0;
    std::size_t restarts = 0;
    std::map<std::size_t, std::size_t> calls_histogram;  // calls in a round -> rounds, successful pass
    double duration_ms = 0;
};

// One fault-attack trial: fresh Bob key, fresh oracle, recover_key. Success
// means the recovered key equals Bob's.
template <std::size_t N>
TrialReport run_attack_trial(SidhParams<N> const &params, std::uint64_t campaign_seed, std::uint64_t index)
{
    TrialReport r;
    r.param_set = params.name;
    r.index = index;
    r.seed = trial_seed(campaign_seed, index);
    r.e3 = params.e3();
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(r.seed);
    auto key = random_private_key(params, Side::bob, rng);
    FaultOracle<N> victim(params, key, rng());
    auto pk = keygen(params, key);
    auto res = recover_key<N>(
        params, [&victim](PublicKey<N> const &q, std::size_t i) { return victim(q, i); }, pk, rng);
    r.success = res.success && res.sk == key.sk;
    r.oracle_calls = victim.calls();
    r.trit_rounds = res.trit_rounds;
    r.restarts = res.restarts;
    for (auto c : res.calls_per_trit)
        ++r.calls_histogram[c];
    r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Same shape for the faultless attack on the naive GF(p) reject; the
// histogram counts queries per trit and oracle_calls counts reject queries.
template <std::size_t N>
TrialReport run_faultless_trial(SidhParams<N> const &params, std::uint64_t campaign_seed, std::uint64_t index)
{
    TrialReport r;
    r.param_set = params.name;
    r.index = index;
    r.seed = trial_seed(campaign_seed, index);
    r.e3 = params.e3();
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(r.seed);
    auto key = random_private_key(params, Side::bob, rng);
    RejectOracle<N> victim(params, key);
    auto res = faultless_attack<N>(
        params, [&victim](PublicKey<N> const &q) { return victim(q); }, keygen(params, key), rng);
    r.success = res.success && res.sk == key.sk;
    r.oracle_calls = victim.calls();
    r.trit_rounds = res.queries_per_trit.size();
    r.restarts = res.restarts;
    for (auto q : res.queries_per_trit)
        ++r.calls_histogram[q];
    r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

struct Aggregate {
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t oracle_calls = 0;
    std::size_t trit_rounds = 0;
    std::map<std::size_t, std::size_t> calls_histogram;
    double duration_ms = 0;

    void add(TrialReport const &r)
    {
        ++trials;
        successes += r.success;
        oracle_calls += r.oracle_calls;
        trit_rounds += r.trit_rounds;
        for (auto const &[k, v] : r.calls_histogram)
            calls_histogram[k] += v;
        duration_ms += r.duration_ms;
    }

    std::optional<double> success_rate() const
    {
        return trials ? std::optional<double>(double(successes) / double(trials)) : std::nullopt;
    }
    std::optional<double> mean_calls() const
    {
        return trials ? std::optional<double>(double(oracle_calls) / double(trials)) : std::nullopt;
    }
    std::optional<double> mean_calls_per_trit() const
    {
        return trit_rounds ? std::optional<double>(double(oracle_calls) / double(trit_rounds)) : std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Pushforward benchmark.

struct BenchReport {
    std::string param_set;
    unsigned k = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double honest_ms = 0;
    double randomized_ms = 0;
    std::size_t correct = 0;        // randomized j == honest j on honest keys
    std::size_t forged = 0;         // forged rounds measured
    std::size_t agree = 0;          // verdict == attacker's prediction, degree k
    std::size_t agree_plain = 0;    // same, unprotected victim
    std::size_t forced = 0;         // Bob's i-th curve is E6, degree k
    std::size_t trit_ok = 0;        // infer_trit on the victim's answers gives s_i, degree k
    std::size_t trit_ok_plain = 0;  // same, unprotected victim

    double overhead() const { return honest_ms > 0 ? randomized_ms / honest_ms : 0; }
};

namespace detail {

// One forged round against a victim answering through verdict(pk, i).
// Returns whether infer_trit settled on the right trit.
template <std::size_t N, class Verdict>
bool forged_round(Candidates<N> const &cand, ForgedKeys<N> const &fk, std::size_t i, unsigned s, Verdict verdict)
{
    std::array<int, 2> v{verdict(fk.pk, i), 0};
    try {
        auto d = infer_trit(cand.in_fp, std::span<int const>(v.data(), 1));
        if (!d.trit) {
            v[1] = verdict(fk.pk_second, i);
            d = infer_trit(cand.in_fp, std::span<int const>(v.data(), 2));
        }
        return d.trit == s;
    } catch (OracleContradiction const &) {
        return false;
    }
}

} // namespace detail

template <std::size_t N>
BenchReport run_pushforward_bench(SidhParams<N> const &params, unsigned k, std::size_t trials, std::uint64_t seed)
{
    using clock = std::chrono::steady_clock;
    BenchReport b;
    b.param_set = params.name;
    b.k = k;
    b.trials = trials;
    b.seed = seed;
    unsigned const e3 = params.e3();
    for (std::size_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(trial_seed(seed, t));
        auto kb = random_private_key(params, Side::bob, rng);
        auto pa = keygen(params, random_private_key(params, Side::alice, rng));

        auto t0 = clock::now();
        auto honest = derive(params, kb, pa);
        auto t1 = clock::now();
        auto rnd = derive_bob_randomized(params, kb, pa, PushforwardConfig{k}, rng);
        auto t2 = clock::now();
        b.honest_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        b.randomized_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
        b.correct += honest.has_value() && rnd.j.has_value() && *honest == *rnd.j;

        // A forged round at a random level against Bob's true prefix.
        std::size_t i = static_cast<std::size_t>(rng() % (e3 - 1));
        UInt<N> prefix{};
        for (std::size_t l = 0; l < i; ++l)
            for (unsigned v = 0; v < kb.trit(l); ++v)
                prefix = prefix + small_pow<N>(3, l);
        unsigned s = kb.trit(i);
        auto fk = forge_public_keys(params, prefix, i, rng, ForgeOptions{true});
        auto cand = candidate_kernels(params, prefix, i, fk);
        ++b.forged;
        b.agree += oracle_randomized(params, kb, fk.pk, i, PushforwardConfig{k}, rng).bit == int(cand.in_fp[s]);
        b.agree_plain += oracle(params, kb, fk.pk, i, rng).bit == int(cand.in_fp[s]);
        auto route = derive_bob_randomized(params, kb, fk.pk, PushforwardConfig{k}, rng);
        auto const &cs = route.bob_chain.trace.coeffs;
        b.forced += cs.size() > i && !(cs[i].alpha == cs[i].beta) &&
                    affine_a_from_projective(cs[i]) == Fp2<N>(params.field(), 6);
        b.trit_ok += detail::forged_round(cand, fk, i, s, [&](PublicKey<N> const &q, std::size_t l) {
            return oracle_randomized(params, kb, q, l, PushforwardConfig{k}, rng).bit;
        });
        b.trit_ok_plain += detail::forged_round(
            cand, fk, i, s, [&](PublicKey<N> const &q, std::size_t l) { return oracle(params, kb, q, l, rng).bit; });
    }
    return b;
}

} // namespace sidhfault
