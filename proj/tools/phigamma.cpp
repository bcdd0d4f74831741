#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phigamma/artin_schreier.hpp"
#include "phigamma/errors.hpp"
#include "phigamma/gamma_complexes.hpp"
#include "phigamma/homotopy_tools.hpp"
#include "phigamma/phigamma_mod.hpp"
#include "phigamma/tate_sen.hpp"
#include "phigamma/witt_side.hpp"

using namespace phigamma;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// raised after the report is written, to select the exit status
struct Verdict {
    int code;
    std::string message;
};

struct JobSpec {
    std::string command;
    std::string input;
    int p = 3;
    int s = 1;
    std::int64_t window = 32;
    int doublings = 2;
    std::string format;
    std::uint64_t seed = 1;
    std::string report;

    bool prime_given = false, power_given = false, window_given = false;

    WindowSchedule schedule() const { return {window, doublings}; }
    // solvers widen their own window on exact input unless one is forced
    std::optional<Rational> solve_window() const {
        return window_given ? std::optional<Rational>(Rational(window)) : std::nullopt;
    }

    void validate() const {
        if (p < 3 || !is_prime(p)) throw UsageError("--prime must be an odd prime, got " + std::to_string(p));
        if (s < 1 || s > 6) throw UsageError("--power must lie in [1, 6], got " + std::to_string(s));
        if (window < 1) throw UsageError("--window must be positive");
        if (doublings < 0 || doublings > 12) throw UsageError("--doublings must lie in [0, 12]");
        if (!format.empty() && format != "csv" && format != "json") throw UsageError("--format must be csv or json");
    }
};

std::string rat(const Rational& r) {
    return r.denominator() == 1 ? std::to_string(r.numerator())
                                : std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

json opt_rat(const std::optional<Rational>& r) { return r ? json(rat(*r)) : json(nullptr); }

std::string join(const std::vector<int>& v, char sep = ' ') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void flatten(const json& j, const std::string& prefix, std::ostringstream& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
    } else {
        out << csv_field(prefix) << ',' << csv_field(j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

// generic key,value rendering for reports without a natural table
std::string key_value_csv(const json& j) {
    std::ostringstream out;
    out << "# " << j.value("format", std::string("phigamma")) << "\nkey,value\n";
    flatten(j, "", out);
    return out.str();
}

struct Output {
    json report;
    std::string csv;  // empty: key,value rendering
    std::optional<Verdict> verdict;
};

std::string cohomology_csv(const CohomologyReport& R) {
    std::ostringstream out;
    out << "# phigamma-cohomology 1\n" << R.to_csv();
    out << "\nwindow";
    for (std::size_t n = 0; n < R.dims.size(); ++n) out << ",h" << n;
    out << '\n';
    for (auto& t : R.trace) {
        out << t.window;
        for (int l : t.lengths) out << ',' << l;
        out << '\n';
    }
    out << "\neuler," << R.euler << "\nverdict," << R.verdict() << '\n';
    return out.str();
}

std::optional<Verdict> stabilization_verdict(const CohomologyReport& R) {
    if (R.stable) return std::nullopt;
    std::int64_t bad = R.trace.empty() ? 0 : R.trace.back().window;
    for (std::size_t k = R.trace.size(); k-- > 0;)
        if (R.trace[k].lengths != R.trace.back().lengths) {
            bad = R.trace[k].window;
            break;
        }
    return Verdict{3, "cohomology did not stabilize: window " + std::to_string(bad) +
                          " disagrees with the largest window; rerun with a larger --window or more --doublings"};
}

PhiGammaModule load_input(const JobSpec& job) {
    if (job.input.empty()) throw UsageError(job.command + ": a module description file is required");
    PhiGammaModule D = load_module(job.input);
    if (job.prime_given && job.p != D.p)
        throw UsageError("--prime " + std::to_string(job.p) + " does not match the module prime " + std::to_string(D.p));
    if (job.power_given) {
        if (job.s > D.s)
            throw UsageError("--power " + std::to_string(job.s) + " exceeds the module power " + std::to_string(D.s));
        if (job.s < D.s) D = reduce_mod(D, job.s);
    }
    return D;
}

Output run_cohomology(const JobSpec& job, const std::string& complex, const std::string& mode) {
    PhiGammaModule D = load_input(job);
    HerrMode hm = herr_mode_from_string(mode);
    CohomologyReport R;
    if (complex == "herr") {
        R = cohomology(herr_complex(D, hm), job.schedule());
    } else if (complex == "cone") {
        R = cohomology(phi_cone(gamma_koszul_complex(D, hm)), job.schedule());
    } else if (complex == "semidirect") {
        if (!D.relative) throw UsageError("the semidirect complex needs a relative module");
        WindowSchedule w = job.window_given ? job.schedule() : WindowSchedule{1, job.doublings};
        R = cohomology(semidirect_gamma_complex(D), w, false);
    } else {
        throw UsageError("--complex must be herr, cone or semidirect");
    }
    Output o{R.to_json(), cohomology_csv(R), stabilization_verdict(R)};
    if (!o.verdict && R.les && !R.les->exact)
        o.verdict = Verdict{1, "cone long exact sequence fails at degree " + std::to_string(R.les->failing_degree) +
                                   " (" + R.les->failing_node + ")"};
    return o;
}

Output run_solve_as(const JobSpec& job, const std::string& expr, int depth) {
    NormFieldElement b = nf_parse(expr, job.p);
    ASSolution a = solve_as_general(b, depth, job.solve_window());
    auto vb = v_e(b);
    json j;
    j["format"] = "phigamma-solve-as 1";
    j["prime"] = job.p;
    j["input"] = expr;
    j["input_valuation"] = opt_rat(vb.value);
    j["value"] = a.value.to_string();
    j["depth"] = a.depth;
    j["valuation"] = opt_rat(a.valuation);
    j["certified_below"] = opt_rat(a.certified);
    j["residual_zero"] = a.residual_zero;
    Output o{j, "", std::nullopt};
    if (!a.residual_zero && !a.certified) o.verdict = Verdict{1, "residual a^p - a - b does not vanish"};
    return o;
}

Output run_solve_phi1(const JobSpec& job, const std::vector<std::string>& comps, int level) {
    WittVector z;
    std::optional<WittVector> planted;  // random mode: z = phi(w) - w
    json input = json::array();
    if (comps.empty()) {
        std::mt19937_64 rng(job.seed);
        std::uniform_int_distribution<std::int64_t> coef(0, job.p - 1);
        std::vector<Series> c;
        const std::int64_t g = ipow(job.p, level);
        for (int k = 0; k < job.s; ++k) {
            Series x(job.p, 1, level, kExact);
            for (std::int64_t e = -3 * g; e < 3 * g; ++e) x = x + nf_monomial(job.p, level, e, coef(rng));
            c.push_back(x);
        }
        planted = WittVector::from_series(c);
        z = planted->frobenius() - *planted;
        input = "random";
    } else {
        if (static_cast<int>(comps.size()) > job.s)
            throw UsageError("solve-phi1: got " + std::to_string(comps.size()) + " components for --power " + std::to_string(job.s));
        std::vector<Series> c;
        for (auto& t : comps) {
            c.push_back(nf_parse(t, job.p));
            input.push_back(t);
        }
        while (static_cast<int>(c.size()) < job.s) c.push_back(Series(job.p, 1, 0, kExact));
        z = WittVector::from_series(c);
    }
    WittSolution y = solve_phi_minus_one(z, job.solve_window());
    json j;
    j["format"] = "phigamma-solve-phi1 1";
    j["prime"] = job.p;
    j["power"] = job.s;
    j["seed"] = comps.empty() ? json(job.seed) : json(nullptr);
    j["input"] = input;
    j["z"] = z.to_string();
    j["value"] = y.value.to_string();
    j["depth"] = y.depth;
    j["constant_coefficients"] = constant_coefficients(y.value);
    j["residual_zero"] = y.residual_zero;
    Output o{j, "", std::nullopt};
    if (planted) {
        const bool kernel_ok = is_constant_vector(y.value - *planted);
        o.report["planted"] = planted->to_string();
        o.report["differs_from_planted_by_constant"] = kernel_ok;
        if (!kernel_ok) o.verdict = Verdict{1, "solution and planted preimage differ by a non-constant"};
    }
    if (!y.residual_zero)
        o.verdict = Verdict{3, "(phi - 1) y = z holds only to the working window " +
                                   (job.window_given ? std::to_string(job.window) : std::string("chosen by the solver"))};
    return o;
}

CyclotomicElement parse_cyclotomic(const std::string& text, int p, int n, int s) {
    std::string t;
    for (char c : text)
        if (c != ' ') t += c;
    if (t.rfind("zeta", 0) == 0) {
        std::int64_t k = 1;
        if (t.size() > 4) {
            if (t[4] != '^') throw ParseError("expected '^' after zeta", 1, 5);
            try {
                std::size_t used = 0;
                k = std::stoll(t.substr(5), &used);
                if (used != t.size() - 5) throw ParseError("trailing characters after the exponent", 1, static_cast<int>(6 + used));
            } catch (const std::logic_error&) {
                throw ParseError("malformed exponent", 1, 6);
            }
        }
        return CyclotomicElement::zeta_power(p, n, s, k);
    }
    try {
        json c = json::parse(t);
        if (c.is_number_integer()) return CyclotomicElement::constant(p, n, s, c.get<std::int64_t>());
        if (c.is_array()) return CyclotomicElement::from_coords(p, n, s, c.get<std::vector<std::int64_t>>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed cyclotomic element: ") + e.what(), 1, 1);
    }
    throw ParseError("expected zeta^k, an integer or a coordinate list", 1, 1);
}

Output run_trace(const JobSpec& job, const std::string& expr, int level, const std::string& model, int cyclotomic) {
    json j;
    j["format"] = "phigamma-trace 1";
    j["prime"] = job.p;
    j["input"] = expr;
    j["level"] = level;
    if (cyclotomic > 0) {
        CyclotomicElement x = parse_cyclotomic(expr, job.p, cyclotomic, job.s);
        CyclotomicElement t = cyclotomic_trace(x, level);
        j["field"] = "cyclotomic";
        j["tower_level"] = cyclotomic;
        j["power"] = job.s;
        j["value"] = t.to_string();
        j["coords"] = t.coords();
        j["valuation"] = opt_rat(t.valuation());
    } else {
        NormFieldElement z = nf_parse(expr, job.p);
        TraceModel tm = trace_model_from_string(model);
        NormFieldElement t = tau_projection(z, level, tm);
        j["field"] = "norm";
        j["model"] = to_string(tm);
        j["value"] = t.to_string();
        j["valuation"] = opt_rat(v_e(t).value);
    }
    return {j, "", std::nullopt};
}

Output run_ts_report(const JobSpec& job, int level, int samples, int inversion_samples) {
    TateSenOptions opt;
    opt.p = job.p;
    opt.m = level;
    opt.samples = samples;
    opt.inversion_samples = inversion_samples;
    opt.seed = job.seed;
    if (job.window_given) opt.window = job.window;
    TateSenCertificate C = tate_sen_certificate(opt);
    Output o{C.to_json(), "", std::nullopt};
    std::vector<std::string> failed;
    if (C.ts2a_exact != C.ts2a_total) failed.push_back("TS2(a)");
    if (C.c2.value != Rational(0)) failed.push_back("c2");
    if (C.ts3_residual_zero != C.ts3_total) failed.push_back("TS3 residuals");
    if (job.p == 3 && !C.cyclotomic_tau1_zeta9) failed.push_back("tau_1(zeta_9)");
    o.report["verdict"] = failed.empty() ? "certified" : "failed";
    if (!failed.empty()) {
        std::string msg = "certificate checks failed:";
        for (auto& f : failed) msg += " " + f;
        o.verdict = Verdict{1, msg};
    }
    return o;
}

Output run_cone(const JobSpec& job, int count, int top, const std::string& mode) {
    if (!job.input.empty()) return run_cohomology(job, "cone", mode);
    std::mt19937_64 rng(job.seed);
    json j;
    j["format"] = "phigamma-cone 1";
    j["prime"] = job.p;
    j["power"] = job.s;
    j["seed"] = job.seed;
    j["instances"] = json::array();
    std::ostringstream csv;
    csv << "# phigamma-cone 1\ninstance,source_ranks,target_ranks,cone_lengths,planted,les_exact,failing_node\n";
    int bad = 0;
    for (int k = 0; k < count; ++k) {
        PlantedMap pm = random_planted_map(job.p, job.s, top, rng);
        ChainComplexZ C = mapping_cone(pm.map);
        std::vector<int> lengths;
        for (int n = 0; n <= top + 1; ++n) lengths.push_back(C.cohomology_length(n));
        LesVerdict v = cone_les_check(pm.map);
        bool match = lengths == pm.cone_lengths;
        if (!v.exact || !match) ++bad;
        j["instances"].push_back({{"source_ranks", pm.map.source.ranks},
                                  {"target_ranks", pm.map.target.ranks},
                                  {"cone_lengths", lengths},
                                  {"planted", pm.cone_lengths},
                                  {"les_exact", v.exact},
                                  {"failing_node", v.failing_node},
                                  {"failing_degree", v.failing_degree}});
        csv << k << ',' << join(pm.map.source.ranks) << ',' << join(pm.map.target.ranks) << ',' << join(lengths) << ','
            << join(pm.cone_lengths) << ',' << (v.exact ? "true" : "false") << ',' << v.failing_node << '\n';
    }
    Output o{j, csv.str(), std::nullopt};
    if (bad) o.verdict = Verdict{1, std::to_string(bad) + " cone instances failed"};
    return o;
}

Output run_spectral(const JobSpec& job, int count, int size) {
    std::mt19937_64 rng(job.seed);
    json j;
    j["format"] = "phigamma-spectral 1";
    j["prime"] = job.p;
    j["power"] = job.s;
    j["seed"] = job.seed;
    j["grid"] = size;
    j["instances"] = json::array();
    std::ostringstream csv;
    csv << "# phigamma-spectral 1\ninstance,stable_from,total_lengths,abutment_lengths,abutment_ok\n";
    int bad = 0;
    for (int k = 0; k < count; ++k) {
        PlantedComplex A = random_planted_complex(job.p, job.s, size - 1, rng);
        PlantedComplex B = random_planted_complex(job.p, job.s, size - 1, rng);
        DoubleComplex K = tensor_double_complex(A.complex, B.complex);
        SpectralResult r = spectral_E_pages(K, size + 1);
        if (!r.abutment_ok) ++bad;
        json pages = json::array();
        for (auto& pg : r.pages) pages.push_back({{"r", pg.r}, {"lengths", pg.lengths}});
        j["instances"].push_back({{"ranks", K.ranks},
                                  {"pages", pages},
                                  {"stable_from", r.stable_from},
                                  {"total_lengths", r.total_lengths},
                                  {"abutment_lengths", r.abutment_lengths},
                                  {"abutment_ok", r.abutment_ok}});
        csv << k << ',' << r.stable_from << ',' << join(r.total_lengths) << ',' << join(r.abutment_lengths) << ','
            << (r.abutment_ok ? "true" : "false") << '\n';
    }
    Output o{j, csv.str(), std::nullopt};
    if (bad) o.verdict = Verdict{1, std::to_string(bad) + " grids fail to abut to the total cohomology"};
    return o;
}

Output run_tower(const JobSpec& job, int count, int length, const std::string& tail) {
    if (tail != "zero" && tail != "constant" && tail != "mixed") throw UsageError("--tail must be zero, constant or mixed");
    std::mt19937_64 rng(job.seed);
    json j;
    j["format"] = "phigamma-tower 1";
    j["prime"] = job.p;
    j["power"] = job.s;
    j["seed"] = job.seed;
    j["instances"] = json::array();
    std::ostringstream csv;
    csv << "# phigamma-tower 1\ninstance,tail,lim_profile,lim1_length,mittag_leffler\n";
    int bad = 0;
    for (int k = 0; k < count; ++k) {
        TailConvention tc = tail == "zero" ? TailConvention::EventuallyZero
                          : tail == "constant" ? TailConvention::EventuallyConstant
                          : (k % 2 ? TailConvention::EventuallyConstant : TailConvention::EventuallyZero);
        Tower T = random_tower(job.p, job.s, length, tc, rng);
        LimResult r = tower_lim_lim1(T);
        const int l1 = module_length(r.lim1);
        if (l1 != 0 || !r.mittag_leffler) ++bad;
        std::vector<std::int64_t> prof = module_profile(r.lim);
        std::vector<int> prof_i(prof.begin(), prof.end());
        const char* name = tc == TailConvention::EventuallyZero ? "zero" : "constant";
        json gens = json::array();
        for (auto& M : T.N) gens.push_back(module_profile(M));
        j["instances"].push_back({{"tail", name},
                                  {"modules", gens},
                                  {"lim_profile", prof},
                                  {"lim_length", module_length(r.lim)},
                                  {"lim1_length", l1},
                                  {"lim1_profile", module_profile(r.lim1)},
                                  {"mittag_leffler", r.mittag_leffler}});
        csv << k << ',' << name << ',' << join(prof_i) << ',' << l1 << ',' << (r.mittag_leffler ? "true" : "false") << '\n';
    }
    Output o{j, csv.str(), std::nullopt};
    if (bad) o.verdict = Verdict{1, std::to_string(bad) + " towers have nonzero lim^1"};
    return o;
}

Output run_check_module(const JobSpec& job) {
    json j;
    j["format"] = "phigamma-check-module 1";
    j["input"] = job.input;
    Output o{j, "", std::nullopt};
    try {
        PhiGammaModule D = load_input(job);
        ModuleCheck c = check_module(D);
        o.report["ok"] = c.ok;
        o.report["prime"] = D.p;
        o.report["power"] = D.s;
        o.report["rank"] = D.rank;
        o.report["relative"] = D.relative;
        o.report["chi"] = D.chi();
        if (!c.ok) {
            o.report["invariant"] = c.invariant;
            o.report["row"] = c.row;
            o.report["col"] = c.col;
            o.report["detail"] = c.detail;
            o.verdict = Verdict{1, "invariant '" + c.invariant + "' fails: " + c.detail};
        }
    } catch (const ModuleInvalid& e) {
        o.report["ok"] = false;
        o.report["invariant"] = e.check.invariant;
        o.report["row"] = e.check.row;
        o.report["col"] = e.check.col;
        o.report["detail"] = e.check.detail;
        o.verdict = Verdict{1, e.what()};
    }
    return o;
}

void emit(const JobSpec& job, const Output& o, const std::string& default_format) {
    const std::string fmt = job.format.empty() ? default_format : job.format;
    if (fmt == "json") std::cout << o.report.dump(2) << '\n';
    else std::cout << (o.csv.empty() ? key_value_csv(o.report) : o.csv);
    std::cout.flush();
    if (!job.report.empty()) {
        std::ofstream f(job.report);
        if (!f) throw UsageError("cannot write report " + job.report);
        f << o.report.dump(2) << '\n';
    }
}

int run(int argc, char** argv) {
    CLI::App app{"phigamma: Galois cohomology of (phi, Gamma)-modules over Z/p^s"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "phigamma 1.0");

    JobSpec job;
    app.add_option("--prime", job.p, "odd prime p")->each([&](const std::string&) { job.prime_given = true; });
    app.add_option("--power", job.s, "coefficients Z/p^s, 1 <= s <= 6")->each([&](const std::string&) { job.power_given = true; });
    app.add_option("--window", job.window, "initial window (pi-exponent); also the solver valuation window")
        ->each([&](const std::string&) { job.window_given = true; });
    app.add_option("--doublings", job.doublings, "number of window doublings");
    app.add_option("--format", job.format, "csv or json");
    app.add_option("--seed", job.seed, "seed for sampled checks and random instances");
    app.add_option("--report", job.report, "also write the JSON report to this file");

    std::string complex = "herr", mode = "qp-delta", model = "coefficient", expr, tail = "mixed";
    std::vector<std::string> comps;
    int depth = kDefaultMaxDepth, level = 1, phi_level = 0, cyclo = 0, samples = 200, inv_samples = 50, count = 10,
        top = 2, grid = 3, length = 4;

    auto* coh = app.add_subcommand("cohomology", "stabilized cohomology of a module description");
    coh->add_option("input", job.input, "module description file")->required();
    coh->add_option("--complex", complex, "herr, cone or semidirect");
    coh->add_option("--mode", mode, "qp-delta or torsion-free");

    auto* sas = app.add_subcommand("solve-as", "solve a^p - a = b in the norm field");
    sas->add_option("b", expr, "element such as \"pi^-3 + 2 pi\"")->required();
    sas->add_option("--depth", depth, "maximal Artin-Schreier depth");

    auto* sp1 = app.add_subcommand("solve-phi1", "solve (phi - 1) y = z in W_s");
    sp1->add_option("z", comps, "Witt components z_0 z_1 ...; random when omitted");
    sp1->add_option("--level", phi_level, "perfection level of random inputs");

    auto* tr = app.add_subcommand("trace", "normalized trace tau_m");
    tr->add_option("x", expr, "norm-field element, or zeta^k / integer / [coords] with --cyclotomic")->required();
    tr->add_option("--level", level, "target level m");
    tr->add_option("--model", model, "coefficient or epsilon");
    tr->add_option("--cyclotomic", cyclo, "work in Z[zeta_{p^n}]/p^s for this n");

    auto* ts = app.add_subcommand("ts-report", "Tate-Sen constants with witnesses");
    ts->add_option("--level", level, "level m");
    ts->add_option("--samples", samples, "samples for TS2");
    ts->add_option("--inversion-samples", inv_samples, "samples for TS3");

    auto* cone = app.add_subcommand("cone", "mapping cones: of phi - 1 on a module, or of random maps");
    cone->add_option("input", job.input, "module description file; random maps when omitted");
    cone->add_option("--mode", mode, "qp-delta or torsion-free");
    cone->add_option("--count", count, "number of random maps");
    cone->add_option("--top", top, "top degree of random complexes");

    auto* spc = app.add_subcommand("spectral", "spectral sequences of random tensor grids");
    spc->add_option("--count", count, "number of grids");
    spc->add_option("--grid", grid, "grid size");

    auto* tow = app.add_subcommand("tower", "lim and lim^1 of random finite towers");
    tow->add_option("--count", count, "number of towers");
    tow->add_option("--length", length, "modules before the tail");
    tow->add_option("--tail", tail, "zero, constant or mixed");

    auto* chk = app.add_subcommand("check-module", "validate a module description");
    chk->add_option("input", job.input, "module description file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    job.command = app.get_subcommands().front()->get_name();
    job.validate();
    auto positive = [](int v, const char* name) {
        if (v < 1) throw UsageError(std::string(name) + " must be positive");
    };

    Output out;
    std::string fmt = "json";
    try {
        if (job.command == "cohomology") {
            out = run_cohomology(job, complex, mode);
            fmt = "csv";
        } else if (job.command == "solve-as") {
            positive(depth, "--depth");
            out = run_solve_as(job, expr, depth);
        } else if (job.command == "solve-phi1") {
            if (phi_level < 0) throw UsageError("--level must be >= 0");
            out = run_solve_phi1(job, comps, phi_level);
        } else if (job.command == "trace") {
            if (level < 0) throw UsageError("--level must be >= 0");
            out = run_trace(job, expr, level, model, cyclo);
        } else if (job.command == "ts-report") {
            if (level < 0) throw UsageError("--level must be >= 0");
            positive(samples, "--samples");
            positive(inv_samples, "--inversion-samples");
            out = run_ts_report(job, level, samples, inv_samples);
        } else if (job.command == "cone") {
            positive(count, "--count");
            positive(top, "--top");
            out = run_cone(job, count, top, mode);
            fmt = "csv";
        } else if (job.command == "spectral") {
            positive(count, "--count");
            if (grid < 2 || grid > 5) throw UsageError("--grid must lie in [2, 5]");
            out = run_spectral(job, count, grid);
            fmt = "csv";
        } else if (job.command == "tower") {
            positive(count, "--count");
            positive(length, "--length");
            out = run_tower(job, count, length, tail);
            fmt = "csv";
        } else {
            out = run_check_module(job);
        }
    } catch (const PrecisionError& e) {
        const std::string w = job.window_given || job.command == "cohomology"
                                  ? "window " + std::to_string(job.window) + " with " + std::to_string(job.doublings) + " doublings"
                                  : "default window";
        throw PrecisionError(std::string(e.what()) + " (" + w + ")");
    }
    emit(job, out, fmt);
    if (out.verdict) {
        std::cerr << "phigamma: " << out.verdict->message << '\n';
        return out.verdict->code;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "phigamma: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "phigamma: parse error: " << e.what() << '\n';
        return 2;
    } catch (const PrecisionError& e) {
        std::cerr << "phigamma: precision: " << e.what() << '\n';
        return 3;
    } catch (const MathError& e) {
        std::cerr << "phigamma: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "phigamma: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "phigamma: " << e.what() << '\n';
        return 1;
    }
}
