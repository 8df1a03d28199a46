// sidhfault: parameter generation, honest SIDH, fault-attack campaigns and
// countermeasure benchmarks.
//
// Exit status: 0 success, 1 a trial failed to recover its key (or a benchmark
// lost correctness), 2 usage or IO error.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <sidhfault/campaign.hpp>
#include <sidhfault/sidhfault.hpp>

using namespace sidhfault;
using json = nlohmann::ordered_json;

#ifndef SIDHFAULT_PARAMS_DIR
#define SIDHFAULT_PARAMS_DIR "params"
#endif

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A path, or the name of a shipped set ("toy431", "p434").
std::string load_params_text(std::string const &ref)
{
    namespace fs = std::filesystem;
    if (fs::exists(ref))
        return read_text_file(ref);
    for (fs::path dir : {fs::path("params"), fs::path(SIDHFAULT_PARAMS_DIR)}) {
        auto p = dir / (ref + ".params");
        if (fs::exists(p))
            return read_text_file(p.string());
    }
    throw UsageError("no parameter file or shipped set named '" + ref + "'");
}

template <class Fn>
int with_params(std::string const &ref, Fn &&fn)
{
    std::string text = load_params_text(ref);
    auto [e2, e3] = peek_exponents(text);
    return with_limbs(e2, e3, [&](auto n) {
        constexpr std::size_t N = decltype(n)::value;
        auto params = params_from_text<N>(text);
        return fn(params);
    });
}

void write_file(std::string const &path, std::string const &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw UsageError("cannot write '" + path + "'");
}

std::string default_name(unsigned e2, unsigned e3, std::string const &p_hex)
{
    double bits = e2 + e3 * 1.5849625007211562;
    if (bits <= 16)
        return "toy" + std::to_string(std::stoul(p_hex, nullptr, 16));
    return "p" + std::to_string(static_cast<unsigned>(bits) + 1);
}

// ---------------------------------------------------------------------------

struct GenOpts {
    unsigned e2 = 0, e3 = 0;
    std::uint64_t seed = 0;
    std::string out, name;
};

int cmd_params_gen(GenOpts const &o)
{
    return with_limbs(o.e2, o.e3, [&](auto n) {
        constexpr std::size_t N = decltype(n)::value;
        auto field = PrimeField<N>::create(o.e2, o.e3);
        std::string p_hex = field->modulus().to_hex();
        std::mt19937_64 rng(o.seed);
        auto params = param_gen<N>(o.e2, o.e3, rng, o.name.empty() ? default_name(o.e2, o.e3, p_hex) : o.name);
        validate_params(params);
        write_file(o.out, params_to_text(params));
        std::cout << "p=" << p_hex << '\n';
        return 0;
    });
}

struct KeygenOpts {
    std::string params, side, sk, out, pub;
    std::uint64_t seed = 0;
};

int cmd_keygen(KeygenOpts const &o)
{
    return with_params(o.params, [&](auto const &params) {
        constexpr std::size_t N = std::remove_cvref_t<decltype(params)>::limbs;
        PrivateKey<N> key;
        key.side = parse_side(o.side);
        if (!o.sk.empty()) {
            auto sk = UInt<N>::from_hex(o.sk);
            if (!sk)
                throw ParseError("bad --sk hex '" + o.sk + "'");
            key.sk = *sk;
            check_scalar(params, key);
        } else {
            std::mt19937_64 rng(o.seed);
            key = random_private_key(params, key.side, rng);
        }
        auto pk = keygen(params, key);
        std::string pk_text = public_key_to_text(params, key.side, pk);
        if (!o.out.empty())
            write_file(o.out, private_key_to_text(params, key));
        if (!o.pub.empty())
            write_file(o.pub, pk_text);
        else
            std::cout << pk_text;
        return 0;
    });
}

struct DeriveOpts {
    std::string params, sk, pk;
};

int cmd_derive(DeriveOpts const &o)
{
    return with_params(o.params, [&](auto const &params) {
        auto key = private_key_from_text(params, read_text_file(o.sk));
        auto [side, pk] = public_key_from_text(params, read_text_file(o.pk));
        if (side == key.side)
            throw UsageError("the public key belongs to the same side as the private key");
        auto j = derive(params, key, pk);
        if (!j)
            throw InconsistentPublicKey("derive failed: malformed public key");
        std::cout << "j=" << j->to_string() << '\n';
        return 0;
    });
}

// ---------------------------------------------------------------------------
// Campaigns.

struct CampaignOpts {
    std::string params, json_out, csv_out;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool timing = false;
};

json histogram_json(std::map<std::size_t, std::size_t> const &h)
{
    json j = json::object();
    for (auto const &[k, v] : h)
        j[std::to_string(k)] = v;
    return j;
}

json trial_json(TrialReport const &r, bool timing)
{
    json j;
    j["type"] = "trial";
    j["param_set"] = r.param_set;
    j["trial"] = r.index;
    j["seed"] = r.seed;
    j["e3"] = r.e3;
    j["success"] = r.success;
    j["oracle_calls"] = r.oracle_calls;
    j["trit_rounds"] = r.trit_rounds;
    j["restarts"] = r.restarts;
    j["calls_per_trit_histogram"] = histogram_json(r.calls_histogram);
    if (timing)
        j["duration_ms"] = r.duration_ms;
    return j;
}

json optional_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// Lines reach the sink in any order and leave it in trial order, so a
// campaign's report does not depend on --jobs.
class OrderedSink {
public:
    explicit OrderedSink(std::ostream *out) : out_(out) {}

    void put(std::size_t index, std::string line)
    {
        std::lock_guard lock(mu_);
        pending_.emplace(index, std::move(line));
        while (!pending_.empty() && pending_.begin()->first == next_) {
            if (out_)
                *out_ << pending_.begin()->second << '\n' << std::flush;
            pending_.erase(pending_.begin());
            ++next_;
        }
    }

private:
    std::ostream *out_;
    std::mutex mu_;
    std::map<std::size_t, std::string> pending_;
    std::size_t next_ = 0;
};

template <class RunTrial>
int run_campaign(CampaignOpts const &o, std::string const &param_set, unsigned e3, double expected_calls,
                 RunTrial run)
{
    std::ofstream file;
    std::ostream *out = nullptr;
    if (o.json_out == "-") {
        out = &std::cout;
    } else if (!o.json_out.empty()) {
        file.open(o.json_out, std::ios::binary | std::ios::trunc);
        if (!file)
            throw UsageError("cannot write '" + o.json_out + "'");
        out = &file;
    }

    OrderedSink sink(out);
    Aggregate agg;
    std::mutex agg_mu;
    std::atomic<std::size_t> next{0};
    auto t0 = std::chrono::steady_clock::now();
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < o.trials;) {
            TrialReport r = run(t);
            {
                std::lock_guard lock(agg_mu);
                agg.add(r);
            }
            sink.put(t, trial_json(r, o.timing).dump());
        }
    };
    unsigned jobs = std::max(1u, o.jobs);
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < jobs; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto &th : pool)
        th.join();
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json a;
    a["type"] = "aggregate";
    a["param_set"] = param_set;
    a["e3"] = e3;
    a["campaign_seed"] = o.seed;
    a["trials"] = agg.trials;
    a["successes"] = agg.successes;
    a["success_rate"] = optional_json(agg.success_rate());
    a["mean_oracle_calls"] = optional_json(agg.mean_calls());
    a["mean_calls_per_trit"] = optional_json(agg.mean_calls_per_trit());
    a["expected_calls"] = expected_calls;
    a["calls_per_trit_histogram"] = histogram_json(agg.calls_histogram);
    if (o.timing)
        a["mean_duration_ms"] = agg.trials ? json(agg.duration_ms / double(agg.trials)) : json(nullptr);
    sink.put(o.trials, a.dump());
    if (file && !file.flush())
        throw UsageError("cannot write '" + o.json_out + "'");

    if (!o.csv_out.empty()) {
        std::ostringstream csv;
        csv << "param_set,e3,trials,success_rate,mean_oracle_calls,expected_calls,mean_calls_per_trit\n";
        auto num = [](std::optional<double> v) { return v ? std::to_string(*v) : std::string(); };
        csv << param_set << ',' << e3 << ',' << agg.trials << ',' << num(agg.success_rate()) << ','
            << num(agg.mean_calls()) << ',' << expected_calls << ',' << num(agg.mean_calls_per_trit()) << '\n';
        write_file(o.csv_out, csv.str());
    }

    std::ostream &log = out == &std::cout ? std::cerr : std::cout;
    log << param_set << ": " << agg.successes << '/' << agg.trials << " recovered";
    if (agg.trials)
        log << ", mean calls " << *agg.mean_calls() << " (expected " << expected_calls << ")";
    log << ", " << wall << " s wall\n";
    return agg.successes == agg.trials ? 0 : 1;
}

int cmd_attack(CampaignOpts const &o)
{
    return with_params(o.params, [&](auto const &params) {
        double expected = 5.0 / 3.0 * double(params.e3() - 1);
        return run_campaign(o, params.name, params.e3(), expected,
                            [&](std::size_t t) { return run_attack_trial(params, o.seed, t); });
    });
}

int cmd_faultless(CampaignOpts const &o)
{
    return with_params(o.params, [&](auto const &params) {
        // Two guesses per trit at most when each query splits cleanly.
        double expected = 5.0 / 3.0 * double(params.e3() - 1);
        return run_campaign(o, params.name, params.e3(), expected,
                            [&](std::size_t t) { return run_faultless_trial(params, o.seed, t); });
    });
}

struct BenchOpts {
    std::string params, json_out;
    unsigned k = 0;
    std::size_t trials = 20;
    std::uint64_t seed = 0;
};

int cmd_bench(BenchOpts const &o)
{
    return with_params(o.params, [&](auto const &params) {
        if (o.k > params.e2())
            throw UsageError("--k exceeds e2 = " + std::to_string(params.e2()));
        auto b = run_pushforward_bench(params, o.k, o.trials, o.seed);
        auto rate = [&](std::size_t n, std::size_t d) { return d ? json(double(n) / double(d)) : json(nullptr); };
        json j;
        j["param_set"] = b.param_set;
        j["k"] = b.k;
        j["trials"] = b.trials;
        j["seed"] = b.seed;
        j["honest_ms"] = b.honest_ms;
        j["randomized_ms"] = b.randomized_ms;
        j["overhead_ratio"] = b.trials ? json(b.overhead()) : json(nullptr);
        j["correct"] = b.correct;
        j["correct_rate"] = rate(b.correct, b.trials);
        j["forged_rounds"] = b.forged;
        j["agreement_rate"] = rate(b.agree, b.forged);
        j["agreement_rate_unprotected"] = rate(b.agree_plain, b.forged);
        j["forced_curve_rate"] = rate(b.forced, b.forged);
        j["trit_success_rate"] = rate(b.trit_ok, b.forged);
        j["trit_success_rate_unprotected"] = rate(b.trit_ok_plain, b.forged);
        std::string text = j.dump(2) + "\n";
        if (o.json_out.empty() || o.json_out == "-")
            std::cout << text;
        else
            write_file(o.json_out, text);
        return b.correct == b.trials ? 0 : 1;
    });
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"SIDH with a simulated coefficient fault: protocol, attack and countermeasures"};
    app.require_subcommand(1);

    GenOpts gen;
    auto *params_cmd = app.add_subcommand("params", "Parameter sets");
    params_cmd->require_subcommand(1);
    auto *gen_cmd = params_cmd->add_subcommand("gen", "Generate a parameter set for p = 2^e2 3^e3 - 1");
    gen_cmd->add_option("--e2", gen.e2, "Exponent of 2 (even)")->required();
    gen_cmd->add_option("--e3", gen.e3, "Exponent of 3")->required();
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--out", gen.out, "Output file")->required();
    gen_cmd->add_option("--name", gen.name, "Set name (default toyP or pBITS)");

    KeygenOpts kg;
    auto *keygen_cmd = app.add_subcommand("keygen", "Honest key generation");
    keygen_cmd->add_option("--params", kg.params, "Parameter file or shipped set name")->required();
    keygen_cmd->add_option("--side", kg.side, "alice or bob")->required()->check(CLI::IsMember({"alice", "bob"}));
    keygen_cmd->add_option("--sk", kg.sk, "Private scalar in hex (otherwise drawn from --seed)");
    keygen_cmd->add_option("--seed", kg.seed, "Seed for a random private key");
    keygen_cmd->add_option("--out", kg.out, "Private key file");
    keygen_cmd->add_option("--pub", kg.pub, "Public key file (default stdout)");

    DeriveOpts dv;
    auto *derive_cmd = app.add_subcommand("derive", "Shared j-invariant from a private key and the peer's public key");
    derive_cmd->add_option("--params", dv.params, "Parameter file or shipped set name")->required();
    derive_cmd->add_option("--sk", dv.sk, "Own private key file")->required();
    derive_cmd->add_option("--pk", dv.pk, "Peer public key file")->required();

    auto add_campaign = [](CLI::App *cmd, CampaignOpts &o) {
        cmd->add_option("--params", o.params, "Parameter file or shipped set name")->required();
        cmd->add_option("--trials", o.trials, "Number of independent trials");
        cmd->add_option("--seed", o.seed, "Campaign seed");
        cmd->add_option("--json", o.json_out, "JSON-lines report ('-' for stdout)");
        cmd->add_option("--csv", o.csv_out, "Flattened aggregate as CSV");
        cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_flag("--timing", o.timing, "Record wall-clock durations in the report");
    };

    CampaignOpts atk;
    auto *attack_cmd = app.add_subcommand("attack", "Fault-attack campaign: recover fresh Bob keys");
    add_campaign(attack_cmd, atk);

    BenchOpts bench;
    CampaignOpts fl;
    auto *cm_cmd = app.add_subcommand("countermeasure", "Countermeasures");
    cm_cmd->require_subcommand(1);
    auto *bench_cmd = cm_cmd->add_subcommand("bench", "Randomized pushforward: overhead and attack degradation");
    bench_cmd->add_option("--params", bench.params, "Parameter file or shipped set name")->required();
    bench_cmd->add_option("--k", bench.k, "Pushforward degree 2^k")->required();
    bench_cmd->add_option("--trials", bench.trials, "Number of trials");
    bench_cmd->add_option("--seed", bench.seed, "Seed");
    bench_cmd->add_option("--json", bench.json_out, "Output file (default stdout)");
    auto *fl_cmd = cm_cmd->add_subcommand("faultless", "Attack the naive GF(p) reject without faults");
    add_campaign(fl_cmd, fl);

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd)
            return cmd_params_gen(gen);
        if (*keygen_cmd)
            return cmd_keygen(kg);
        if (*derive_cmd)
            return cmd_derive(dv);
        if (*attack_cmd)
            return cmd_attack(atk);
        if (*bench_cmd)
            return cmd_bench(bench);
        if (*fl_cmd)
            return cmd_faultless(fl);
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
