#pragma once

// Configuration-driven experiment pipeline: checks, simulation, correlation
// estimates on growing record prefixes and least-squares fits.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbnet/circuit.hpp"
#include "qbnet/estimate.hpp"
#include "qbnet/model.hpp"
#include "qbnet/pencil.hpp"
#include "qbnet/psgs.hpp"
#include "qbnet/simulate.hpp"
#include "qbnet/volterra.hpp"

namespace qbnet {

struct ExperimentConfig {
    Network network;
    Vector theta_true;
    std::vector<double> freqs, amplitudes, phases;
    double T = 0.05;
    std::size_t nd = 10000;
    double dt = 0.0;  // 0: T / 20
    int checkpoints_per_decade = 10;
    bool full_density = false;
    std::vector<double> sigmas{0.01};
    int seeds = 1;
    std::uint64_t master_seed = 0;
    std::vector<MultiIndex> tuples;
    int truncation = 3;
    Vector theta0;
    std::vector<std::vector<MultiIndex>> fit_sets;
    std::vector<std::vector<double>> fit_weights;  // per set, empty = equal
    std::optional<Bounds> bounds;

    double step() const { return dt > 0.0 ? dt : T / 20.0; }
};

/// Configuration error with the offending line (0 when unknown).
class ConfigError : public ParameterError {
public:
    explicit ConfigError(const std::string& report) : ParameterError(report) {}
};

namespace detail {

inline std::size_t line_of_key(const std::string& text, const std::string& key)
{
    const auto pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 0;
    return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

struct ConfigReader {
    const std::string& text;
    std::vector<std::string> problems;

    void fail(const std::string& key, const std::string& msg)
    {
        std::ostringstream os;
        const auto line = line_of_key(text, key);
        if (line) os << "line " << line << ": ";
        os << key << ": " << msg;
        problems.push_back(os.str());
    }

    Matrix matrix(const nlohmann::json& j, const std::string& key)
    {
        if (!j.is_array()) {
            fail(key, "expected a nested array of numbers");
            return {};
        }
        const Index r = static_cast<Index>(j.size());
        const Index c = r ? static_cast<Index>(j[0].is_array() ? j[0].size() : 0) : 0;
        Matrix m = Matrix::Zero(r, c);
        for (Index i = 0; i < r; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Index>(row.size()) != c) {
                fail(key, "rows must be arrays of equal length");
                return {};
            }
            for (Index k = 0; k < c; ++k) {
                if (!row[static_cast<std::size_t>(k)].is_number()) {
                    fail(key, "entries must be numbers");
                    return {};
                }
                m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
            }
        }
        return m;
    }

    std::vector<double> numbers(const nlohmann::json& j, const std::string& key)
    {
        std::vector<double> v;
        if (j.is_number()) return {j.get<double>()};
        if (!j.is_array()) {
            fail(key, "expected an array of numbers");
            return v;
        }
        for (const auto& x : j) {
            if (!x.is_number()) {
                fail(key, "entries must be numbers");
                return {};
            }
            v.push_back(x.get<double>());
        }
        return v;
    }

    MultiIndex tuple(const nlohmann::json& j, const std::string& key)
    {
        std::vector<int> idx;
        if (!j.is_array() || j.empty()) {
            fail(key, "a tuple is a nonempty array of 1-based mode indices");
            return {};
        }
        for (const auto& x : j) {
            if (!x.is_number_integer() || x.get<int>() < 1) {
                fail(key, "tuple indices are integers >= 1");
                return {};
            }
            idx.push_back(x.get<int>() - 1);
        }
        return MultiIndex(idx);
    }
};

inline Vector to_vector(const std::vector<double>& v)
{
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
    return out;
}

} // namespace detail

inline std::vector<std::vector<MultiIndex>> default_fit_sets()
{
    return {{{0}}, {{0}, {0, 0}}, {{0}, {0, 0}, {0, 0, 0}}};
}

/// Parse and validate a JSON experiment configuration. All problems are
/// collected into one line-numbered report.
inline ExperimentConfig parse_config(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto byte = std::min<std::size_t>(e.byte, text.size());
        const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n')) + 1;
        throw ConfigError("line " + std::to_string(line) + ": JSON syntax error: " + e.what());
    }
    detail::ConfigReader rd{text, {}};
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");

    // model
    const auto& m = j.value("model", nlohmann::json::object());
    if (m.contains("preset")) {
        if (m["preset"] != "circuit")
            rd.fail("preset", "unknown preset (available: circuit)");
        else
            c.network = preset_circuit();
        c.theta_true = circuit_true_theta();
    } else if (m.contains("subsystems")) {
        int idx = 1;
        for (const auto& s : m["subsystems"]) {
            const auto get = [&](const char* k) { return s.contains(k) ? rd.matrix(s[k], k) : Matrix(); };
            SubsystemMatrices sm;
            sm.E = get("E");
            sm.A_xx = get("A_xx");
            const Index mx = sm.E.rows();
            sm.B_xv = get("B_xv");
            sm.B_xu = get("B_xu");
            sm.C_zx = get("C_zx");
            sm.C_yx = get("C_yx");
            const Index mv = sm.B_xv.cols(), mu = sm.B_xu.cols(), mz = sm.C_zx.rows(), my = sm.C_yx.rows();
            auto opt = [&](const char* k, Index r, Index cc) {
                return s.contains(k) ? rd.matrix(s[k], k) : Matrix(Matrix::Zero(r, cc));
            };
            sm.Gamma_xx = opt("Gamma_xx", mx, mx * mx);
            sm.Gamma_xv = opt("Gamma_xv", mx, mx * mv);
            sm.Gamma_xu = opt("Gamma_xu", mx, mx * mu);
            sm.D_zv = opt("D_zv", mz, mv);
            sm.D_zu = opt("D_zu", mz, mu);
            sm.D_yv = opt("D_yv", my, mv);
            sm.D_yu = opt("D_yu", my, mu);
            try {
                c.network.subsystems.emplace_back(std::move(sm), idx++);
            } catch (const std::exception& e) {
                rd.fail("subsystems", e.what());
            }
        }
        std::vector<Matrix> basis;
        if (m.contains("basis"))
            for (const auto& b : m["basis"]) basis.push_back(rd.matrix(b, "basis"));
        else
            rd.fail("model", "inline models need an SCM \"basis\"");
        try {
            c.network.basis = SCMBasis(basis, c.network.mv(), c.network.mz());
            if (m.contains("input_map")) c.network.input_map = rd.matrix(m["input_map"], "input_map");
            c.network.validate();
        } catch (const std::exception& e) {
            rd.fail("basis", e.what());
        }
        if (m.contains("theta_true"))
            c.theta_true = detail::to_vector(rd.numbers(m["theta_true"], "theta_true"));
        else
            rd.fail("model", "\"theta_true\" is required to simulate the network");
    } else {
        rd.fail("model", "expected \"preset\" or \"subsystems\"");
    }
    if (m.contains("theta_true") && m.contains("preset"))
        c.theta_true = detail::to_vector(rd.numbers(m["theta_true"], "theta_true"));

    // psgs
    const auto& p = j.value("psgs", nlohmann::json::object());
    c.freqs = p.contains("frequencies") ? rd.numbers(p["frequencies"], "frequencies") : std::vector<double>{4.5};
    c.amplitudes = p.contains("amplitudes") ? rd.numbers(p["amplitudes"], "amplitudes") : std::vector<double>(c.freqs.size(), 5.0);
    if (p.contains("phases")) c.phases = rd.numbers(p["phases"], "phases");
    if (c.amplitudes.size() != c.freqs.size()) rd.fail("amplitudes", "one amplitude per frequency");
    if (!c.phases.empty() && c.phases.size() != c.freqs.size()) rd.fail("phases", "one phase per frequency");
    for (const double w : c.freqs)
        if (!(w >= 0.0)) rd.fail("frequencies", "frequencies must be >= 0");

    // sampling
    const auto& s = j.value("sampling", nlohmann::json::object());
    c.T = s.value("T", 0.05);
    if (!(c.T > 0.0)) rd.fail("T", "sampling period must be positive");
    const auto nd = s.value("nd", 10000.0);
    if (!(nd >= 1.0) || nd != std::floor(nd)) rd.fail("nd", "N_d must be a positive integer");
    c.nd = static_cast<std::size_t>(std::max(1.0, nd));
    c.dt = s.value("dt", 0.0);
    if (c.dt < 0.0 || (c.dt > 0.0 && c.dt > c.T)) rd.fail("dt", "need 0 < dt <= T");
    c.checkpoints_per_decade = s.value("checkpoints_per_decade", 10);
    if (c.checkpoints_per_decade < 1) rd.fail("checkpoints_per_decade", "must be >= 1");
    c.full_density = s.value("full_density", false);

    // noise
    const auto& n = j.value("noise", nlohmann::json::object());
    if (n.contains("sigma")) c.sigmas = rd.numbers(n["sigma"], "sigma");
    for (const double x : c.sigmas)
        if (!(x >= 0.0)) rd.fail("sigma", "noise levels must be >= 0");
    c.seeds = n.value("seeds", 1);
    if (c.seeds < 1) rd.fail("seeds", "need at least one replica");
    c.master_seed = n.value("master_seed", std::uint64_t{0});

    c.truncation = j.value("truncation", 3);
    if (c.truncation < 1 || c.truncation > 8) rd.fail("truncation", "truncation order must be in 1..8");

    // tuples and fit
    if (j.contains("tuples"))
        for (const auto& t : j["tuples"]) c.tuples.push_back(rd.tuple(t, "tuples"));
    const auto& f = j.value("fit", nlohmann::json::object());
    if (f.contains("sets")) {
        for (const auto& set : f["sets"]) {
            std::vector<MultiIndex> v;
            for (const auto& t : set) v.push_back(rd.tuple(t, "sets"));
            c.fit_sets.push_back(std::move(v));
        }
    } else {
        c.fit_sets = default_fit_sets();
    }
    if (f.contains("weights"))
        for (const auto& w : f["weights"]) c.fit_weights.push_back(rd.numbers(w, "weights"));
    if (!c.fit_weights.empty() && c.fit_weights.size() != c.fit_sets.size())
        rd.fail("weights", "one weight list per fit set");
    for (std::size_t i = 0; i < c.fit_weights.size() && i < c.fit_sets.size(); ++i)
        if (c.fit_weights[i].size() != c.fit_sets[i].size())
            rd.fail("weights", "one weight per tuple of set " + std::to_string(i + 1));
    const Index mth = c.network.basis.size();
    c.theta0 = f.contains("theta0") ? detail::to_vector(rd.numbers(f["theta0"], "theta0"))
                                    : Vector::Constant(mth, 0.1);
    if (c.theta0.size() != mth) rd.fail("theta0", "length must equal the number of SCM basis matrices");
    if (c.theta_true.size() != mth) rd.fail("theta_true", "length must equal the number of SCM basis matrices");
    if (f.contains("lower") || f.contains("upper")) {
        Bounds b;
        b.lower = f.contains("lower") ? detail::to_vector(rd.numbers(f["lower"], "lower"))
                                      : Vector::Constant(mth, -std::numeric_limits<double>::infinity());
        b.upper = f.contains("upper") ? detail::to_vector(rd.numbers(f["upper"], "upper"))
                                      : Vector::Constant(mth, std::numeric_limits<double>::infinity());
        if (b.lower.size() != mth || b.upper.size() != mth)
            rd.fail("lower", "bounds must have one entry per parameter");
        else
            c.bounds = b;
    }
    for (const auto& set : c.fit_sets)
        for (const auto& t : set)
            if (std::find(c.tuples.begin(), c.tuples.end(), t) == c.tuples.end()) c.tuples.push_back(t);
    if (c.tuples.empty()) c.tuples.push_back(MultiIndex{0});

    if (!rd.problems.empty()) {
        std::string rep = "invalid configuration:";
        for (const auto& pr : rd.problems) rep += "\n  " + pr;
        throw ConfigError(rep);
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Log-spaced record lengths N (10^(j/per_decade), rounded, unique) up to nd.
inline std::vector<std::size_t> checkpoints(std::size_t nd, int per_decade, bool full)
{
    std::vector<std::size_t> out;
    if (full) {
        for (std::size_t n = 1; n <= nd; ++n) out.push_back(n);
        return out;
    }
    for (int j = 0;; ++j) {
        const double v = std::pow(10.0, static_cast<double>(j) / per_decade);
        const auto n = static_cast<std::size_t>(std::llround(v));
        if (n >= nd) break;
        if (out.empty() || out.back() != n) out.push_back(n);
    }
    out.push_back(nd);
    return out;
}

struct CheckSummary {
    bool regular = false, impulse_free = false;
    PencilSpectrum spectrum;
    AssumptionReport assumptions;
    bool ok() const { return regular && impulse_free && assumptions.ok(); }
};

struct EstimateRow {
    std::size_t nd;
    MultiIndex tuple;
    CVector phi_hat, truth;
};

struct FitRow {
    std::size_t nd;
    std::size_t set;
    FitResult fit;
};

struct CellResult {
    double sigma = 0.0;
    int replica = 0;
    std::uint64_t seed = 0;
    std::vector<EstimateRow> estimates;
    std::vector<FitRow> fits;
    double seconds = 0.0;
};

struct ExperimentResult {
    CheckSummary check;
    std::vector<CellResult> cells;
    std::vector<std::size_t> checkpoints;
    double simulate_seconds = 0.0;
};

inline std::string set_label(const std::vector<MultiIndex>& set)
{
    std::string s = "{";
    for (std::size_t i = 0; i < set.size(); ++i) s += (i ? "," : "") + set[i].label();
    return s + "}";
}

/// Bound objects shared by all pipeline stages.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg)
        : cfg_(std::move(cfg)),
          model_(lump(cfg_.network, SIPVector(cfg_.theta_true))),
          psgs_(multisine(cfg_.freqs, cfg_.amplitudes, cfg_.phases)),
          eig_(eigen(psgs_))
    {
        require(eig_.mu == model_.mu(), "probing signal channels do not match model inputs");
        for (const auto& t : cfg_.tuples) check_tuple(t, eig_.size());
    }

    const ExperimentConfig& config() const { return cfg_; }
    const LumpedQBTI& model() const { return model_; }
    const PSGSEigen& eigenstructure() const { return eig_; }

    CheckSummary check() const
    {
        CheckSummary c;
        c.regular = is_regular(model_.E, model_.A);
        c.impulse_free = c.regular && is_impulse_free(model_.E, model_.A);
        if (c.regular) c.spectrum = generalized_eigs(model_.E, model_.A);
        c.assumptions = check_assumptions(eig_, c.spectrum, cfg_.truncation, cfg_.T);
        return c;
    }

    void require_checks() const
    {
        const auto c = check();
        if (c.ok()) return;
        std::string msg = "assumption check failed:";
        if (!c.regular) msg += "\n  pencil is not regular";
        if (c.regular && !c.impulse_free) msg += "\n  pencil is not impulse-free";
        for (const auto& m : c.assumptions.messages) msg += "\n  " + m;
        throw DomainError(msg);
    }

    Trajectory simulate() const
    {
        const double t_end = cfg_.T * static_cast<double>(cfg_.nd);
        return simulate_dae(model_, eig_, Vector::Zero(model_.mx()), t_end, cfg_.step());
    }

    /// Analytic tangential condition for a tuple: the sum over its orderings.
    CVector truth(const MultiIndex& t) const
    {
        PsiEvaluator ev(model_, eig_);
        CVector s = CVector::Zero(model_.my());
        for (const auto& p : permutations_of(t)) s += ev.phi_u(p);
        return s;
    }

    CellResult run_cell(const Trajectory& tr, double sigma, int replica, std::uint64_t seed,
                        const std::vector<std::size_t>& cps, bool fits) const
    {
        const auto t0 = std::chrono::steady_clock::now();
        CellResult cell;
        cell.sigma = sigma;
        cell.replica = replica;
        cell.seed = seed;
        const SampledRecord rec = sample_outputs(tr, cfg_.T, cfg_.nd, sigma, seed);
        std::vector<std::size_t> counts;
        for (const auto n : cps) counts.push_back(n + 1);

        CorrOptions co;
        co.max_order = cfg_.truncation;
        std::map<MultiIndex, std::vector<TangentialEstimate>> per_tuple;
        for (const auto& t : cfg_.tuples) {
            per_tuple[t] = corr_estimate_prefixes(rec, eig_, t, counts, co);
            const CVector tr_phi = truth(t);
            for (std::size_t c = 0; c < cps.size(); ++c)
                cell.estimates.push_back({cps[c], t, per_tuple[t][c].phi_hat, tr_phi});
        }
        if (fits) {
            for (std::size_t si = 0; si < cfg_.fit_sets.size(); ++si) {
                const auto& set = cfg_.fit_sets[si];
                for (std::size_t c = 0; c < cps.size(); ++c) {
                    std::vector<TangentialEstimate> est;
                    for (const auto& t : set) est.push_back(per_tuple.at(t)[c]);
                    const std::vector<double> w =
                        cfg_.fit_weights.empty() ? std::vector<double>{} : cfg_.fit_weights[si];
                    FitProblem prob(cfg_.network, eig_, std::move(est), SIPVector(cfg_.theta0), w,
                                    cfg_.bounds);
                    cell.fits.push_back({cps[c], si, fit_theta(prob)});
                }
            }
        }
        cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return cell;
    }

    /// Full pipeline over all (sigma, replica) cells, in parallel.
    ExperimentResult run(bool fits = true, unsigned threads = 0) const
    {
        ExperimentResult res;
        res.check = check();
        require_checks();
        const auto t0 = std::chrono::steady_clock::now();
        const Trajectory tr = simulate();
        res.simulate_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.checkpoints = checkpoints(cfg_.nd, cfg_.checkpoints_per_decade, cfg_.full_density);

        struct Job { double sigma; int replica; std::uint64_t seed; };
        std::vector<Job> jobs;
        std::uint64_t k = 0;
        for (const double s : cfg_.sigmas)
            for (int r = 0; r < cfg_.seeds; ++r) jobs.push_back({s, r, split_seed(cfg_.master_seed, k++)});
        res.cells.resize(jobs.size());

        if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
        threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::exception_ptr err;
        auto worker = [&] {
            for (std::size_t i; (i = next++) < jobs.size();) {
                try {
                    res.cells[i] = run_cell(tr, jobs[i].sigma, jobs[i].replica, jobs[i].seed,
                                            res.checkpoints, fits);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
        return res;
    }

private:
    ExperimentConfig cfg_;
    LumpedQBTI model_;
    PSGS psgs_;
    PSGSEigen eig_;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << std::setprecision(17);
    return out;
}

} // namespace detail

inline void write_nonparam_csv(const std::filesystem::path& path, const ExperimentResult& r)
{
    auto out = detail::open_out(path);
    out << "nd,sigma,replica,seed,tuple,channel,est_re,est_im,truth_re,truth_im\n";
    for (const auto& c : r.cells)
        for (const auto& e : c.estimates)
            for (Index ch = 0; ch < e.phi_hat.size(); ++ch)
                out << e.nd << ',' << c.sigma << ',' << c.replica << ',' << c.seed << ",\""
                    << e.tuple.label() << "\"," << ch + 1 << ',' << e.phi_hat(ch).real() << ','
                    << e.phi_hat(ch).imag() << ',' << e.truth(ch).real() << ','
                    << e.truth(ch).imag() << '\n';
}

inline void write_param_csv(const std::filesystem::path& path, const ExperimentConfig& cfg,
                            const ExperimentResult& r)
{
    auto out = detail::open_out(path);
    out << "nd,sigma,replica,seed,set";
    for (Index i = 0; i < cfg.theta_true.size(); ++i) out << ",theta" << i + 1;
    out << ",residual_norm,jacobian_rcond,iterations,converged\n";
    for (const auto& c : r.cells)
        for (const auto& f : c.fits) {
            out << f.nd << ',' << c.sigma << ',' << c.replica << ',' << c.seed << ",\""
                << set_label(cfg.fit_sets[f.set]) << '"';
            for (Index i = 0; i < f.fit.theta_hat.size(); ++i) out << ',' << f.fit.theta_hat[i];
            out << ',' << f.fit.residual_norm << ',' << f.fit.jacobian_rcond << ','
                << f.fit.iterations << ',' << (f.fit.converged ? 1 : 0) << '\n';
        }
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentResult& r)
{
    using nlohmann::json;
    json j;
    j["theta_true"] = std::vector<double>(cfg.theta_true.data(), cfg.theta_true.data() + cfg.theta_true.size());
    j["T"] = cfg.T;
    j["nd"] = cfg.nd;
    j["truncation"] = cfg.truncation;
    j["checks"] = {{"regular", r.check.regular},
                   {"impulse_free", r.check.impulse_free},
                   {"assumptions_ok", r.check.assumptions.ok()},
                   {"messages", r.check.assumptions.messages}};
    json eigs = json::array();
    for (const auto& l : r.check.spectrum.eigenvalues) eigs.push_back({l.real(), l.imag()});
    j["checks"]["pencil_eigenvalues"] = eigs;
    j["runtime_seconds"]["simulate"] = r.simulate_seconds;

    json sets = json::array();
    for (std::size_t si = 0; si < cfg.fit_sets.size(); ++si) {
        for (const double sigma : cfg.sigmas) {
            json s;
            s["set"] = set_label(cfg.fit_sets[si]);
            s["sigma"] = sigma;
            Vector mean_err = Vector::Zero(cfg.theta_true.size());
            int count = 0;
            json reps = json::array();
            for (const auto& c : r.cells) {
                if (c.sigma != sigma) continue;
                for (const auto& f : c.fits)
                    if (f.set == si && f.nd == cfg.nd) {
                        const Vector err = (f.fit.theta_hat.values - cfg.theta_true).cwiseAbs();
                        mean_err += err;
                        ++count;
                        reps.push_back({{"replica", c.replica},
                                        {"seed", c.seed},
                                        {"fit", to_json(f.fit)},
                                        {"abs_error", std::vector<double>(err.data(), err.data() + err.size())}});
                    }
            }
            if (count) mean_err /= count;
            s["mean_abs_error"] = std::vector<double>(mean_err.data(), mean_err.data() + mean_err.size());
            s["replicas"] = reps;
            sets.push_back(s);
        }
    }
    j["fits"] = sets;
    double cell_time = 0.0;
    for (const auto& c : r.cells) cell_time += c.seconds;
    j["runtime_seconds"]["cells_total"] = cell_time;
    return j;
}

inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                          const ExperimentResult& r)
{
    std::filesystem::create_directories(dir);
    write_nonparam_csv(dir / "nonparam.csv", r);
    write_param_csv(dir / "param.csv", cfg, r);
    auto out = detail::open_out(dir / "summary.json");
    out << summary_json(cfg, r).dump(2) << '\n';
}

} // namespace qbnet
