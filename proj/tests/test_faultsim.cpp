#include <gtest/gtest.h>

#include <random>

#include <sidhfault/attack.hpp>

#include "support/common.hpp"

using namespace testing_support;

namespace {

PrivateKey<1> bob(std::uint64_t sk) { return {Side::bob, UInt<1>{sk}}; }

PublicKey<1> basis_pk(SidhParams<1> const &P) { return {P.xPB, P.xQB, P.xRB}; }

// Public keys Bob may be handed: the basis itself, honest Alice keys and
// forged keys for random prefixes.
std::vector<PublicKey<1>> sample_keys(std::mt19937_64 &rng)
{
    auto const &P = toy_params();
    std::vector<PublicKey<1>> out{basis_pk(P)};
    for (std::uint64_t a = 0; a < 16; ++a)
        out.push_back(keygen(P, PrivateKey<1>{Side::alice, UInt<1>{a}}));
    for (int t = 0; t < 40; ++t) {
        std::size_t i = rng() % 2;
        UInt<1> prefix{i == 0 ? 0 : rng() % 3};
        auto fk = forge_public_keys(P, prefix, i, rng, ForgeOptions{true});
        out.push_back(fk.pk);
        out.push_back(fk.pk_second);
    }
    return out;
}

} // namespace

TEST(Oracle, RejectsBadIndexBeforeComputing)
{
    auto const &P = toy_params();
    std::mt19937_64 rng(1);
    auto const &f = P.field();
    PublicKey<1> junk{Toy1::zero(f), Toy1::zero(f), Toy1::zero(f)};
    EXPECT_THROW(oracle(P, bob(3), junk, 2, rng), ContractViolation);
    EXPECT_THROW(oracle(P, bob(3), junk, 99, rng), ContractViolation);
    EXPECT_THROW(oracle(P, PrivateKey<1>{Side::alice, UInt<1>{3}}, junk, 0, rng), ContractViolation);
}

TEST(Oracle, MalformedKeysGiveZero)
{
    auto const &P = toy_params();
    auto const &f = P.field();
    std::mt19937_64 rng(2);
    auto v = oracle(P, bob(3), PublicKey<1>{Toy1::zero(f), Toy1::zero(f), Toy1::zero(f)}, 0, rng);
    EXPECT_EQ(v.bit, 0);
    EXPECT_FALSE(v.reason.empty());
    for (int t = 0; t < 100; ++t) {
        PublicKey<1> junk{Toy1::random(f, rng), Toy1::random(f, rng), Toy1::random(f, rng)};
        OracleVerdict w;
        ASSERT_NO_THROW(w = oracle(P, bob(5), junk, t % 2, rng));
    }
}

TEST(Oracle, Deterministic)
{
    auto const &P = toy_params();
    std::mt19937_64 keys(3);
    for (auto const &pk : sample_keys(keys)) {
        for (std::size_t i = 0; i < 2; ++i) {
            std::mt19937_64 a(77), b(77);
            auto va = oracle(P, bob(11), pk, i, a, true), vb = oracle(P, bob(11), pk, i, b, true);
            ASSERT_EQ(va.bit, vb.bit);
            ASSERT_EQ(va.reason, vb.reason);
            ASSERT_EQ(va.trace, vb.trace);
        }
    }
}

// Exhaustive over Bob's keys: the verdict is the GF(p) membership of the
// coefficient the fault hits. The one exception is a coefficient in GF(p)
// whose projective scale is purely imaginary: zeroing leaves (0 : 0).
TEST(Oracle, VerdictIsMembershipOfFaultedCoefficient)
{
    auto const &P = toy_params();
    std::mt19937_64 keys(4), rng(5);
    std::size_t ones = 0, zeros = 0, vanished = 0, same_j = 0;
    for (auto const &pk : sample_keys(keys)) {
        for (std::uint64_t sk = 0; sk < 27; ++sk) {
            auto honest = derive_chain(P, bob(sk), pk);
            ASSERT_TRUE(honest.ok());
            for (std::size_t i = 0; i < 2; ++i) {
                auto v = oracle(P, bob(sk), pk, i, rng);
                auto const &c = honest.trace.coeffs[i + 1];
                bool in_fp = coeff_in_fp(c);
                if (!in_fp) {
                    ASSERT_EQ(v.bit, 0);
                    ++zeros;
                    continue;
                }
                if (c.alpha.re().is_zero() && c.beta.re().is_zero()) {
                    ASSERT_EQ(v.bit, 0);
                    ++vanished;
                    continue;
                }
                ASSERT_EQ(v.bit, 1) << v.reason;
                ++ones;
                auto faulted = derive_chain(P, bob(sk), pk, FaultHook{i});
                ASSERT_EQ(j_invariant(faulted.coeff), j_invariant(honest.coeff));
                ++same_j;
            }
        }
    }
    EXPECT_GT(ones, 500u);
    EXPECT_GT(zeros, 500u);
    EXPECT_EQ(same_j, ones);
    // Not asserted to be zero: it is a real gap at this field size.
    RecordProperty("vanished", static_cast<int>(vanished));
}

TEST(Oracle, FailedKernelCheckIsReported)
{
    auto const &P = toy_params();
    std::mt19937_64 keys(6), rng(7);
    bool seen = false;
    for (auto const &pk : sample_keys(keys)) {
        for (std::uint64_t sk = 0; sk < 27 && !seen; ++sk) {
            auto v = oracle(P, bob(sk), pk, 0, rng, true);
            if (v.bit == 0 && v.failed_step) {
                EXPECT_GE(*v.failed_step, 1u);
                ASSERT_TRUE(v.trace.has_value());
                EXPECT_NE(v.trace->find("# kernel order check failed at isogeny " + std::to_string(*v.failed_step)),
                          std::string::npos);
                EXPECT_NE(v.trace->find("# fault after isogeny 0"), std::string::npos);
                seen = true;
            }
        }
    }
    EXPECT_TRUE(seen);
}

TEST(Oracle, CountsCalls)
{
    auto const &P = toy_params();
    FaultOracle<1> O(P, bob(4), 1);
    auto pk = basis_pk(P);
    O(pk, 0);
    O(pk, 1);
    O.query(pk, 0);
    EXPECT_EQ(O.calls(), 3u);
    EXPECT_THROW(O(pk, 2), ContractViolation);
}

TEST(Oracle, P434HonestCoefficientIsNotInFp)
{
    auto const &P = p434_params();
    std::mt19937_64 rng(8);
    auto kb = random_private_key(P, Side::bob, rng);
    auto pa = keygen(P, random_private_key(P, Side::alice, rng));
    auto v = oracle(P, kb, pa, 5, rng);
    EXPECT_EQ(v.bit, 0);
}

TEST(ForcedCurve, BasisAtLevelZero)
{
    auto const &P = toy_params();
    EXPECT_TRUE(debug_assert_forced_curve(P, UInt<1>{0}, basis_pk(P), 0));
}

TEST(ForcedCurve, ForgedKeysAndWrongPrefix)
{
    auto const &P = toy_params();
    std::mt19937_64 rng(9);
    int wrong_true = 0, wrong_total = 0;
    for (int t = 0; t < 60; ++t) {
        std::uint64_t prefix = rng() % 3;
        auto fk = forge_public_keys(P, UInt<1>{prefix}, 1, rng);
        ASSERT_TRUE(debug_assert_forced_curve(P, UInt<1>{prefix}, fk.pk, 1));
        ASSERT_TRUE(debug_assert_forced_curve(P, UInt<1>{prefix}, fk.pk_second, 1));
        for (std::uint64_t other = 0; other < 3; ++other) {
            if (other == prefix)
                continue;
            ++wrong_total;
            wrong_true += debug_assert_forced_curve(P, UInt<1>{other}, fk.pk, 1);
        }
    }
    // A wrong first step leaves the path back to E6.
    EXPECT_EQ(wrong_true, 0) << wrong_total;
}
