// Walks through one key recovery at SIDHp434 size, then shows the two
// countermeasures on the toy set.
//
//   demo_attack [seed]

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>

#include <sidhfault/sidhfault.hpp>

using namespace sidhfault;

int main(int argc, char **argv)
{
    std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
    std::mt19937_64 rng(seed);

    auto p434 = param_gen<7>(216, 137, rng, "p434");
    auto bob = random_private_key(p434, Side::bob, rng);
    auto bob_pk = keygen(p434, bob);
    std::cout << "Bob's secret: " << bob.sk.to_hex() << "\n";

    FaultOracle<7> victim(p434, bob, rng());
    std::size_t last = 0;
    OracleFn<7> watched = [&](PublicKey<7> const &pk, std::size_t i) {
        int bit = victim(pk, i);
        if (i % 34 == 0 && i != last) {
            std::cout << "  trit " << i << ", " << victim.calls() << " faults so far\n";
            last = i;
        }
        return bit;
    };
    auto t0 = std::chrono::steady_clock::now();
    auto res = recover_key<7>(p434, watched, bob_pk, rng);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "Recovered:    " << res.sk.to_hex() << (res.sk == bob.sk ? "  (match)" : "  (MISMATCH)") << "\n"
              << victim.calls() << " faulted derives (expected about " << 5.0 / 3.0 * 136 << "), " << secs
              << " s\n\n";

    // Toy set: pushforward and the naive reject.
    std::mt19937_64 toy_rng(431);
    auto toy = param_gen<1>(4, 3, toy_rng, "toy431");
    PrivateKey<1> key{Side::bob, UInt<1>{7}};
    for (unsigned k : {0u, 2u}) {
        auto b = run_pushforward_bench(toy, k, 500, seed);
        std::cout << "pushforward k=" << k << ": verdicts match the attacker's prediction "
                  << double(b.agree) / double(b.forged) << ", trit recovered " << double(b.trit_ok) / double(b.forged)
                  << "\n";
    }

    RejectOracle<1> guarded(toy, key);
    auto fl = faultless_attack<1>(
        toy, [&](PublicKey<1> const &pk) { return guarded(pk); }, keygen(toy, key), toy_rng);
    std::cout << "naive GF(p) reject, no faults: recovered " << fl.sk.to_hex() << " after " << guarded.calls()
              << " queries\n";
    return res.sk == bob.sk && fl.success ? 0 : 1;
}
