#include "scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <thread>

#include "cvqkd/errors.hpp"
#include "cvqkd/fading.hpp"

namespace cvqkd::tools {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

const json& member(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail("missing key '" + std::string(key) + "' in " + path);
    return *it;
}

double number_at(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    if (!v.is_number()) fail(path + "." + std::string(key) + " must be a number");
    return v.get<double>();
}

std::string string_at(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    if (!v.is_string()) fail(path + "." + std::string(key) + " must be a string");
    return v.get<std::string>();
}

bool bool_at(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    if (!v.is_boolean()) fail(path + "." + std::string(key) + " must be true or false");
    return v.get<bool>();
}

long long integer_at(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    const std::string where = path + "." + std::string(key);
    if (!v.is_number()) fail(where + " must be an integer");
    const double d = v.get<double>();
    if (d != std::floor(d) || std::abs(d) > 9.0e18) fail(where + " must be an integer");
    return static_cast<long long>(d);
}

void require_object(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path + " must be an object");
}

/// Replaces fields of `dst` with same-named fields of `raw`, rejecting keys
/// that have no default and values whose type does not match the default's.
void overlay(json& dst, const json& raw, const std::string& path) {
    require_object(raw, path);
    for (auto it = raw.begin(); it != raw.end(); ++it) {
        auto slot = dst.find(it.key());
        if (slot == dst.end()) fail("unknown key '" + it.key() + "' in " + path);
        const json& v = it.value();
        const bool compatible = (slot->is_number() && v.is_number()) ||
                                (slot->is_boolean() && v.is_boolean()) ||
                                (slot->is_string() && v.is_string()) ||
                                (slot->is_array() && v.is_array());
        if (!compatible) fail("wrong type for " + path + "." + it.key());
        *slot = v;
    }
}

void check_one_of(const std::string& value, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    std::string msg = where + " must be one of {";
    bool first = true;
    for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
    }
    fail(msg + "}, got '" + value + "'");
}

json default_source() {
    return {{"V", 0.5},
            {"Vx", 10.0},
            {"Vp", 10.0},
            {"dV_trusted", 0.0},
            {"dV_untrusted", 0.0}};
}

json default_channel() {
    return {{"transmittance", 1.0}, {"excess_noise", 0.05}, {"attenuation_db_per_km", 0.2}};
}

json default_measurement() {
    return {{"type", "homodyne_x"},
            {"r_switch", 0.5},
            {"t_het", 0.5},
            {"as_data", "use_for_key"}};
}

json default_fading_block() { return {{"mean_transmittance", 0.9}, {"variance_sqrt_T", 0.02}}; }

json default_finite_size() {
    return {{"N", 1e7},          {"r_x", 0.5},
            {"r_p", 0.25},       {"r_k", -1.0},
            {"disclose", false}, {"use_all_for_key", false},
            {"eps_bar", 1e-10},  {"confidence", 6.5}};
}

bool scenario_uses_protocol(const std::string& scenario) {
    return scenario == "keyrate" || scenario == "tolerance";
}

std::string regime_of(const json& resolved, const std::string& scenario) {
    if (scenario == "fading") return "fading";
    if (scenario_uses_protocol(scenario)) return resolved.at("regime").get<std::string>();
    return "asymptotic";
}

MeasurementScheme scheme_from(const json& m) {
    const std::string type = m.at("type").get<std::string>();
    const std::string as = m.at("as_data").get<std::string>();
    MeasurementScheme::ASData fate = MeasurementScheme::ASData::UseForKey;
    if (as == "discard") fate = MeasurementScheme::ASData::Discard;
    if (as == "disclose") fate = MeasurementScheme::ASData::Disclose;
    if (type == "homodyne_x") return MeasurementScheme::homodyne_x();
    if (type == "homodyne_p") return MeasurementScheme::homodyne_p();
    if (type == "biased_homodyne")
        return MeasurementScheme::biased_homodyne(m.at("r_switch").get<double>());
    return MeasurementScheme::heterodyne(m.at("t_het").get<double>(), fate);
}

double channel_transmittance(const json& channel) {
    if (channel.contains("distance_km")) {
        return transmittance_from_distance_km(channel.at("distance_km").get<double>(),
                                              channel.at("attenuation_db_per_km").get<double>());
    }
    return channel.at("transmittance").get<double>();
}

/// Axis names a sweep may touch, given the scenario and resolved blocks.
std::vector<std::string> allowed_axes(const json& resolved, const std::string& scenario) {
    std::vector<std::string> axes = {"excess_noise",  "modulation_x",  "modulation_p",
                                     "squeezing",     "trusted_noise", "untrusted_noise"};
    const std::string regime = regime_of(resolved, scenario);
    if (scenario == "fading" || regime == "fading") {
        axes.push_back("mean_transmittance");
        axes.push_back("variance_sqrt_T");
    } else {
        axes.push_back("distance_km");
        axes.push_back("transmittance");
    }
    if (regime == "finite") axes.push_back("block_size");
    if (scenario_uses_protocol(scenario)) {
        const std::string type = resolved.at("measurement").at("type").get<std::string>();
        if (type == "heterodyne") axes.push_back("t_het");
        if (type == "biased_homodyne") axes.push_back("r_switch");
    }
    return axes;
}

json resolve_sweep(const json& raw, const json& resolved, const std::string& scenario) {
    require_object(raw, "sweep");
    const std::string axis = string_at(raw, "sweep", "axis");
    const auto axes = allowed_axes(resolved, scenario);
    if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
        std::string msg = "sweep.axis '" + axis + "' is not available here; choose one of {";
        for (std::size_t i = 0; i < axes.size(); ++i) msg += (i ? ", " : "") + axes[i];
        fail(msg + "}");
    }

    for (auto it = raw.begin(); it != raw.end(); ++it) {
        const std::string& k = it.key();
        if (k != "axis" && k != "values" && k != "from" && k != "to" && k != "points" &&
            k != "log") {
            fail("unknown key '" + k + "' in sweep");
        }
    }

    std::vector<double> values;
    if (raw.contains("values")) {
        for (const char* k : {"from", "to", "points", "log"}) {
            if (raw.contains(k)) fail("sweep gives explicit values; remove sweep." + std::string(k));
        }
        const json& v = raw.at("values");
        if (!v.is_array() || v.empty()) fail("sweep.values must be a nonempty array");
        for (const json& x : v) {
            if (!x.is_number()) fail("sweep.values entries must be numbers");
            values.push_back(x.get<double>());
        }
    } else {
        const double from = number_at(raw, "sweep", "from");
        const double to = number_at(raw, "sweep", "to");
        const long long points = integer_at(raw, "sweep", "points");
        const bool log = raw.contains("log") ? bool_at(raw, "sweep", "log") : false;
        if (points < 1) fail("sweep.points must be at least 1");
        if (log && (from <= 0 || to <= 0)) fail("log-spaced sweep needs positive endpoints");
        if (points == 1) {
            values.push_back(from);
        } else {
            for (long long i = 0; i < points; ++i) {
                const double f = static_cast<double>(i) / static_cast<double>(points - 1);
                values.push_back(log ? from * std::pow(to / from, f) : from + f * (to - from));
            }
        }
    }
    return {{"axis", axis}, {"values", values}};
}

FreeParam free_param_from(const std::string& name) {
    if (name == "Vx") return FreeParam::Vx;
    if (name == "Vp") return FreeParam::Vp;
    if (name == "V") return FreeParam::V;
    if (name == "t_het") return FreeParam::THet;
    if (name == "r_x") return FreeParam::Rx;
    if (name == "r_p") return FreeParam::Rp;
    if (name == "r_k") return FreeParam::Rk;
    fail("optimize.params entry '" + name + "' is not a free parameter");
}

ToleranceAxis tolerance_axis_from(const std::string& name) {
    if (name == "channel_noise") return ToleranceAxis::ChannelNoise;
    if (name == "untrusted_as") return ToleranceAxis::UntrustedAS;
    if (name == "fading_variance") return ToleranceAxis::FadingVariance;
    if (name == "distance") return ToleranceAxis::Distance;
    fail("tolerance.axis '" + name + "' is unknown");
}

const char* tolerance_column(const std::string& axis) {
    if (axis == "channel_noise") return "max_excess_noise";
    if (axis == "untrusted_as") return "max_untrusted_noise";
    if (axis == "fading_variance") return "max_variance_sqrt_T";
    return "max_distance_km";
}

void apply_protocol_axis(ProtocolSetting& s, const std::string& axis, double v, double atten) {
    if (axis == "distance_km") {
        s.ch.T = transmittance_from_distance_km(v, atten);
    } else if (axis == "transmittance") {
        s.ch.T = v;
    } else if (axis == "excess_noise") {
        s.ch.epsilon = v;
    } else if (axis == "modulation_x") {
        s.src.Vx = v;
    } else if (axis == "modulation_p") {
        s.src.Vp = v;
    } else if (axis == "squeezing") {
        s.src.V = v;
    } else if (axis == "trusted_noise") {
        s.src.dV_trusted = v;
    } else if (axis == "untrusted_noise") {
        s.src.dV_untrusted = v;
    } else if (axis == "block_size") {
        s.N = v;
    } else if (axis == "t_het") {
        s.scheme.t_het = v;
    } else if (axis == "r_switch") {
        s.scheme.r_switch = v;
    } else if (axis == "mean_transmittance") {
        s.fading = FadingMoments::from_mean_and_variance(v, s.fading.var_sqrtT);
        s.ch.T = v;
    } else if (axis == "variance_sqrt_T") {
        s.fading = FadingMoments::from_mean_and_variance(s.fading.mean_T, v);
    } else {
        fail("sweep.axis '" + axis + "' is unknown");
    }
}

std::string cell(double v, const char* column) {
    if (!std::isfinite(v)) {
        throw NumericalFailureError(std::string("non-finite value in column '") + column + "'");
    }
    return format_number(v);
}

std::string flag(bool v) { return v ? "1" : "0"; }

/// Optional cell for report quantities that are undefined by construction
/// (rse with a single repetition, relative error with a zero formula
/// variance); emitted empty rather than as NaN.
std::string cell_or_empty(double v) { return std::isfinite(v) ? format_number(v) : ""; }

using Row = std::vector<std::string>;

/// Evaluates `count` rows with up to `threads` workers. Rows are stored by
/// index, so the output order (and the bytes) cannot depend on scheduling.
template <typename F>
std::vector<Row> compute_rows(std::size_t count, int threads, F&& one_row) {
    std::vector<Row> rows(count);
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) rows[i] = one_row(i);
        return rows;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto drain = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                rows[i] = one_row(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
    for (std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return rows;
}

void write_csv(const std::filesystem::path& path, const Row& header,
               const std::vector<Row>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open output file " + path.string());
    auto line = [&out](const Row& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    line(header);
    for (const Row& r : rows) line(r);
}

struct SweepPlan {
    std::string axis;
    std::vector<double> values;
};

SweepPlan sweep_plan(const json& resolved) {
    SweepPlan plan;
    const json& sweep = resolved.at("sweep");
    plan.axis = sweep.at("axis").get<std::string>();
    for (const json& v : sweep.at("values")) plan.values.push_back(v.get<double>());
    return plan;
}

RunPaths keyrate_scenario(const json& resolved, const std::filesystem::path& csv_path,
                          int threads) {
    const ProtocolSetting base = setting_from_config(resolved);
    const double atten = resolved.at("channel").at("attenuation_db_per_km").get<double>();
    const SweepPlan plan = sweep_plan(resolved);

    Row header = {plan.axis, "key_rate_bits", "I_AB", "holevo"};
    const bool finite = base.regime == ProtocolSetting::Regime::Finite;
    if (finite) {
        header.insert(header.end(), {"T_low", "V_eps_x_up", "V_eps_p_up", "delta"});
    }

    auto rows = compute_rows(plan.values.size(), threads, [&](std::size_t i) {
        ProtocolSetting s = base;
        apply_protocol_axis(s, plan.axis, plan.values[i], atten);
        Row row = {format_number(plan.values[i])};
        if (finite) {
            const FiniteKeyResult r = key_rate_finite(s.src, s.ch, s.scheme, s.side, s.beta,
                                                      s.allocation(), s.eps_bar, s.confidence);
            row.push_back(cell(r.rate.key_rate, "key_rate_bits"));
            row.push_back(cell(r.rate.mutual_info, "I_AB"));
            row.push_back(cell(r.rate.holevo, "holevo"));
            row.push_back(cell(r.bounds.T_low, "T_low"));
            row.push_back(cell(r.bounds.V_eps_x_up, "V_eps_x_up"));
            row.push_back(cell(r.bounds.V_eps_p_up, "V_eps_p_up"));
            row.push_back(cell(r.delta, "delta"));
        } else if (s.regime == ProtocolSetting::Regime::Fading) {
            const KeyRateResult r = key_rate_fading(s.src, s.fading, s.ch.epsilon, s.side, s.beta);
            row.push_back(cell(r.key_rate, "key_rate_bits"));
            row.push_back(cell(r.mutual_info, "I_AB"));
            row.push_back(cell(r.holevo, "holevo"));
        } else {
            const KeyRateResult r = key_rate_asymptotic(s.src, s.ch, s.scheme, s.side, s.beta);
            row.push_back(cell(r.key_rate, "key_rate_bits"));
            row.push_back(cell(r.mutual_info, "I_AB"));
            row.push_back(cell(r.holevo, "holevo"));
        }
        return row;
    });

    write_csv(csv_path, header, rows);
    return {csv_path, {}, rows.size()};
}

RunPaths tolerance_scenario(const json& resolved, const std::filesystem::path& csv_path,
                            int threads) {
    const ProtocolSetting base = setting_from_config(resolved);
    const double atten = resolved.at("channel").at("attenuation_db_per_km").get<double>();
    const SweepPlan plan = sweep_plan(resolved);
    const json& tol = resolved.at("tolerance");
    const std::string axis_name = tol.at("axis").get<std::string>();

    const json& opt = resolved.at("optimize");
    std::vector<FreeParam> params;
    for (const json& p : opt.at("params")) params.push_back(free_param_from(p.get<std::string>()));
    std::vector<ParamBounds> bounds;
    for (const json& b : opt.at("bounds")) {
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
            fail("optimize.bounds entries must be [lo, hi] number pairs");
        }
        bounds.push_back({b[0].get<double>(), b[1].get<double>()});
    }

    Row header = {plan.axis, tolerance_column(axis_name), "cap_reached"};
    auto rows = compute_rows(plan.values.size(), threads, [&](std::size_t i) {
        ToleranceQuery q;
        q.problem.base = base;
        apply_protocol_axis(q.problem.base, plan.axis, plan.values[i], atten);
        q.problem.params = params;
        q.problem.bounds = bounds;
        q.problem.grid_points = static_cast<int>(opt.at("grid_points").get<double>());
        q.problem.param_tol = opt.at("param_tol").get<double>();
        q.axis = tolerance_axis_from(axis_name);
        q.axis_origin = tol.at("origin").get<double>();
        q.cap = tol.at("cap").get<double>();
        q.tol = tol.at("tol").get<double>();
        Row row = {format_number(plan.values[i])};
        try {
            const ToleranceResult r = solve_tolerance(q);
            row.push_back(cell(r.value, header[1].c_str()));
            row.push_back(flag(r.cap_reached));
        } catch (const NoPositiveKeyError&) {
            // no key even with a clean axis: the tolerance is zero
            row.push_back("0");
            row.push_back("0");
        }
        return row;
    });

    write_csv(csv_path, header, rows);
    return {csv_path, {}, rows.size()};
}

RunPaths fading_scenario(const json& resolved, const std::filesystem::path& csv_path,
                         int threads) {
    const ProtocolSetting base = setting_from_config(resolved);
    const SweepPlan plan = sweep_plan(resolved);

    Row header = {plan.axis, "key_rate_bits", "I_AB", "holevo", "eps_x_equiv", "eps_p_equiv"};
    auto rows = compute_rows(plan.values.size(), threads, [&](std::size_t i) {
        ProtocolSetting s = base;
        apply_protocol_axis(s, plan.axis, plan.values[i], 0.2);
        const KeyRateResult r = key_rate_fading(s.src, s.fading, s.ch.epsilon, s.side, s.beta);
        const FadingEquivalentNoise eq = fading_equivalent_noise(s.src, s.fading);
        return Row{format_number(plan.values[i]),
                   cell(r.key_rate, "key_rate_bits"),
                   cell(r.mutual_info, "I_AB"),
                   cell(r.holevo, "holevo"),
                   cell(eq.eps_x, "eps_x_equiv"),
                   cell(eq.eps_p, "eps_p_equiv")};
    });

    write_csv(csv_path, header, rows);
    return {csv_path, {}, rows.size()};
}

RunPaths mc_validate_scenario(const json& resolved, const std::filesystem::path& csv_path,
                              int threads) {
    const json& src = resolved.at("source");
    const json& mc = resolved.at("mc");
    SimConfig cfg;
    cfg.src.V = src.at("V").get<double>();
    cfg.src.Vx = src.at("Vx").get<double>();
    cfg.src.Vp = src.at("Vp").get<double>();
    cfg.src.dV_trusted = src.at("dV_trusted").get<double>();
    cfg.src.dV_untrusted = src.at("dV_untrusted").get<double>();
    cfg.T = channel_transmittance(resolved.at("channel"));
    cfg.eps = resolved.at("channel").at("excess_noise").get<double>();
    cfg.scheme = scheme_from(resolved.at("measurement"));
    cfg.m = static_cast<std::int64_t>(mc.at("m").get<double>());
    cfg.n = static_cast<std::int64_t>(mc.at("n").get<double>());
    cfg.repetitions = static_cast<int>(mc.at("repetitions").get<double>());
    cfg.seed = resolved.at("seed").get<std::uint64_t>();
    cfg.verbatim_het_scaling = mc.at("verbatim_het_scaling").get<bool>();
    cfg.validate();

    const SimResult result = simulate_block(cfg, threads);
    const std::vector<VarianceReportRow> report = empirical_variance_report(result, cfg);

    Row header = {"quantity",       "true_value", "empirical_mean", "empirical_var",
                  "formula_var",    "relative_error", "rse",        "rse_defined",
                  "within_5rse",    "mean_bias_sigma", "bias_flagged"};
    std::vector<Row> rows;
    for (const VarianceReportRow& r : report) {
        rows.push_back({r.quantity,
                        cell(r.true_value, "true_value"),
                        cell(r.empirical_mean, "empirical_mean"),
                        cell(r.empirical_var, "empirical_var"),
                        cell(r.formula_var, "formula_var"),
                        cell_or_empty(r.relative_error),
                        cell_or_empty(r.rse),
                        flag(r.rse_defined),
                        flag(r.within_5rse),
                        cell(r.mean_bias_sigma, "mean_bias_sigma"),
                        flag(r.bias_flagged)});
    }

    write_csv(csv_path, header, rows);
    return {csv_path, {}, rows.size()};
}

RunPaths allocation_scenario(const json& resolved, const std::filesystem::path& csv_path,
                             int threads) {
    const json& alloc = resolved.at("allocation");
    NoisySqueezedState state;
    state.var_x = alloc.at("var_x").get<double>();
    state.var_p = alloc.at("var_p").get<double>();
    state.purity = 1.0 / std::sqrt(state.var_x * state.var_p);
    const double vx = alloc.at("modulation_x").get<double>();
    const long long points = static_cast<long long>(alloc.at("points").get<double>());
    const double eps_max = state.var_x - 1.0 / state.var_p;

    Row header = {"eps_x", "eps_p", "V", "holevo_reverse", "holevo_direct", "key_direct_bits"};
    auto rows = compute_rows(static_cast<std::size_t>(points), threads, [&](std::size_t i) {
        const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        const double eps_x = f * eps_max;
        const NoiseSplit split = allocate_noise(state, eps_x);
        const CovarianceMatrix cm = allocation_cm(split.V, vx, split.eps_x, split.eps_p);
        const MeasurementScheme hom = MeasurementScheme::homodyne_x();
        return Row{cell(eps_x, "eps_x"),
                   cell(split.eps_p, "eps_p"),
                   cell(split.V, "V"),
                   cell(holevo_bound(cm, hom, ReconciliationSide::Reverse), "holevo_reverse"),
                   cell(holevo_bound(cm, hom, ReconciliationSide::Direct), "holevo_direct"),
                   cell(dr_key_with_allocation(state, vx, eps_x), "key_direct_bits")};
    });

    write_csv(csv_path, header, rows);
    return {csv_path, {}, rows.size()};
}

} // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json default_config(const std::string& scenario) {
    check_one_of(scenario, "scenario",
                 {"keyrate", "tolerance", "fading", "mc-validate", "allocation"});
    json cfg;
    cfg["scenario"] = scenario;
    cfg["seed"] = 1;
    cfg["threads"] = 1;
    cfg["output"] = {{"path", scenario + ".csv"}};

    if (scenario == "mc-validate") {
        cfg["source"] = default_source();
        cfg["channel"] = default_channel();
        cfg["measurement"] = default_measurement();
        cfg["mc"] = {{"m", 10000}, {"n", 10000}, {"repetitions", 10000},
                     {"verbatim_het_scaling", false}};
        return cfg;
    }
    if (scenario == "allocation") {
        cfg["allocation"] = {{"var_x", 0.55}, {"var_p", 5.5}, {"modulation_x", 10.0},
                             {"points", 21}};
        return cfg;
    }

    cfg["source"] = default_source();
    cfg["channel"] = default_channel();
    cfg["reconciliation"] = {{"side", "reverse"}, {"beta", 0.95}};
    if (scenario == "fading") {
        cfg["fading"] = default_fading_block();
    } else {
        cfg["regime"] = "asymptotic";
        cfg["measurement"] = default_measurement();
    }
    if (scenario == "tolerance") {
        cfg["tolerance"] = {{"axis", "channel_noise"}, {"origin", 0.0}, {"cap", -1.0},
                            {"tol", 1e-4}};
        cfg["optimize"] = {{"params", json::array()}, {"bounds", json::array()},
                           {"grid_points", 8}, {"param_tol", 1e-4}};
    }
    return cfg;
}

json resolve_config(const nlohmann::json& raw) {
    require_object(raw, "configuration");
    const std::string scenario = string_at(raw, "configuration", "scenario");
    json cfg = default_config(scenario);

    // the regime decides which blocks exist, so settle it before merging
    if (scenario_uses_protocol(scenario)) {
        if (raw.contains("regime")) {
            const json& r = raw.at("regime");
            if (!r.is_string()) fail("regime must be a string");
            cfg["regime"] = r.get<std::string>();
        }
        const std::string regime = cfg["regime"].get<std::string>();
        check_one_of(regime, "regime", {"asymptotic", "finite", "fading"});
        if (regime == "finite") cfg["finite_size"] = default_finite_size();
        if (regime == "fading") cfg["fading"] = default_fading_block();
    } else if (scenario == "fading") {
        if (raw.contains("regime")) {
            const json& r = raw.at("regime");
            if (!r.is_string() || r.get<std::string>() != "fading") {
                fail("scenario 'fading' fixes regime to 'fading'");
            }
            cfg["regime"] = "fading";
        }
    } else if (raw.contains("regime")) {
        fail("scenario '" + scenario + "' takes no regime");
    }

    // channel may be given by distance instead of transmittance, but not both
    if (cfg.contains("channel") && raw.contains("channel")) {
        const json& ch = raw.at("channel");
        require_object(ch, "channel");
        if (ch.contains("distance_km")) {
            if (ch.contains("transmittance")) {
                fail("channel gives both transmittance and distance_km; pick one");
            }
            cfg["channel"].erase("transmittance");
            cfg["channel"]["distance_km"] = 0.0;
        }
    }

    for (auto it = raw.begin(); it != raw.end(); ++it) {
        const std::string& key = it.key();
        if (key == "scenario" || key == "regime" || key == "sweep") continue;
        auto slot = cfg.find(key);
        if (slot == cfg.end()) {
            fail("unknown key '" + key + "' for scenario '" + scenario + "'");
        }
        if (slot->is_object()) {
            overlay(*slot, it.value(), key);
        } else {
            const json& v = it.value();
            const bool compatible = (slot->is_number() && v.is_number()) ||
                                    (slot->is_string() && v.is_string());
            if (!compatible) fail("wrong type for '" + key + "'");
            *slot = v;
        }
    }

    // enumerated fields
    if (cfg.contains("measurement")) {
        check_one_of(cfg["measurement"]["type"].get<std::string>(), "measurement.type",
                     {"homodyne_x", "homodyne_p", "biased_homodyne", "heterodyne"});
        check_one_of(cfg["measurement"]["as_data"].get<std::string>(), "measurement.as_data",
                     {"use_for_key", "discard", "disclose"});
    }
    if (cfg.contains("reconciliation")) {
        check_one_of(cfg["reconciliation"]["side"].get<std::string>(), "reconciliation.side",
                     {"reverse", "direct"});
    }
    if (cfg.contains("tolerance")) {
        const std::string axis = cfg["tolerance"]["axis"].get<std::string>();
        check_one_of(axis, "tolerance.axis",
                     {"channel_noise", "untrusted_as", "fading_variance", "distance"});
        const std::string regime = regime_of(cfg, scenario);
        if (axis == "fading_variance" && regime != "fading") {
            fail("tolerance.axis 'fading_variance' needs regime 'fading'");
        }
    }
    if (cfg.contains("optimize")) {
        const json& params = cfg["optimize"]["params"];
        for (const json& p : params) {
            if (!p.is_string()) fail("optimize.params entries must be strings");
            free_param_from(p.get<std::string>());
        }
        const json& bounds = cfg["optimize"]["bounds"];
        if (!bounds.empty() && bounds.size() != params.size()) {
            fail("optimize.bounds must match optimize.params in length");
        }
    }
    if (scenario == "allocation") {
        const json& a = cfg["allocation"];
        const double var_x = number_at(a, "allocation", "var_x");
        const double var_p = number_at(a, "allocation", "var_p");
        if (!(var_x > 0) || !(var_p > 0) || var_x * var_p < 1.0) {
            fail("allocation.var_x and allocation.var_p must be positive with var_x*var_p >= 1");
        }
        if (integer_at(a, "allocation", "points") < 1) {
            fail("allocation.points must be at least 1");
        }
    }

    // sweep: mandatory for sweeping scenarios, meaningless for the others
    const bool sweeps = scenario_uses_protocol(scenario) || scenario == "fading";
    if (sweeps) {
        if (!raw.contains("sweep")) fail("scenario '" + scenario + "' needs a sweep block");
        cfg["sweep"] = resolve_sweep(raw.at("sweep"), cfg, scenario);
    } else if (raw.contains("sweep")) {
        fail("scenario '" + scenario + "' takes no sweep");
    }

    const std::string out_path = cfg["output"]["path"].get<std::string>();
    if (out_path.empty() || std::filesystem::path(out_path).is_absolute()) {
        fail("output.path must be a relative file name");
    }
    if (integer_at(cfg, "configuration", "seed") < 0) fail("seed must be non-negative");
    if (integer_at(cfg, "configuration", "threads") < 1) fail("threads must be at least 1");
    return cfg;
}

ProtocolSetting setting_from_config(const nlohmann::json& resolved) {
    const std::string scenario = resolved.at("scenario").get<std::string>();
    const std::string regime = regime_of(resolved, scenario);

    ProtocolSetting s;
    const json& src = resolved.at("source");
    s.src.V = src.at("V").get<double>();
    s.src.Vx = src.at("Vx").get<double>();
    s.src.Vp = src.at("Vp").get<double>();
    s.src.dV_trusted = src.at("dV_trusted").get<double>();
    s.src.dV_untrusted = src.at("dV_untrusted").get<double>();

    const json& ch = resolved.at("channel");
    s.ch.kind = ChannelSpec::Kind::Fixed;
    s.ch.T = channel_transmittance(ch);
    s.ch.epsilon = ch.at("excess_noise").get<double>();

    if (resolved.contains("measurement")) s.scheme = scheme_from(resolved.at("measurement"));
    const json& rec = resolved.at("reconciliation");
    s.side = rec.at("side").get<std::string>() == "direct" ? ReconciliationSide::Direct
                                                           : ReconciliationSide::Reverse;
    s.beta = rec.at("beta").get<double>();

    if (regime == "finite") {
        s.regime = ProtocolSetting::Regime::Finite;
        const json& fs = resolved.at("finite_size");
        s.N = fs.at("N").get<double>();
        s.r_x = fs.at("r_x").get<double>();
        s.r_p = fs.at("r_p").get<double>();
        s.r_k = fs.at("r_k").get<double>();
        s.disclose = fs.at("disclose").get<bool>();
        s.use_all_for_key = fs.at("use_all_for_key").get<bool>();
        s.eps_bar = fs.at("eps_bar").get<double>();
        s.confidence = fs.at("confidence").get<double>();
    } else if (regime == "fading") {
        s.regime = ProtocolSetting::Regime::Fading;
        const json& f = resolved.at("fading");
        s.fading = FadingMoments::from_mean_and_variance(
            f.at("mean_transmittance").get<double>(), f.at("variance_sqrt_T").get<double>());
        s.ch.T = s.fading.mean_T;
        if (resolved.contains("measurement") &&
            resolved.at("measurement").at("type").get<std::string>() != "homodyne_x") {
            fail("the fading regime computes the x-homodyne protocol; set measurement.type "
                 "to homodyne_x");
        }
    } else {
        s.regime = ProtocolSetting::Regime::Asymptotic;
    }
    return s;
}

RunPaths run_scenario(const nlohmann::json& resolved, const std::filesystem::path& out_dir) {
    const std::string scenario = resolved.at("scenario").get<std::string>();
    const int threads = static_cast<int>(resolved.at("threads").get<double>());

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path csv_path =
        out_dir / resolved.at("output").at("path").get<std::string>();
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());

    RunPaths paths;
    if (scenario == "keyrate") {
        paths = keyrate_scenario(resolved, csv_path, threads);
    } else if (scenario == "tolerance") {
        paths = tolerance_scenario(resolved, csv_path, threads);
    } else if (scenario == "fading") {
        paths = fading_scenario(resolved, csv_path, threads);
    } else if (scenario == "mc-validate") {
        paths = mc_validate_scenario(resolved, csv_path, threads);
    } else {
        paths = allocation_scenario(resolved, csv_path, threads);
    }

    std::filesystem::path sidecar = csv_path;
    sidecar.replace_extension(".resolved.json");
    std::ofstream side(sidecar, std::ios::binary);
    if (!side) fail("cannot open output file " + sidecar.string());
    side << resolved.dump(2) << '\n';
    paths.sidecar = sidecar;
    return paths;
}

} // namespace cvqkd::tools
