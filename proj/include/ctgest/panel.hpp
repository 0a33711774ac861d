#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctgest/dgp.hpp"

namespace ctgest {

// one subject's discrete-time record, visits indexed 0..k_max
struct PanelSubject {
    std::string id;
    std::vector<double> y_star;              // outcome just before each visit
    std::vector<int> a_star;                 // treatment state at each visit
    std::vector<double> cum_a;               // exposure integral up to each visit
    std::vector<std::vector<double>> l_minus;  // [visit][covariate], column-aligned with l_names
    std::vector<double> v;                   // baseline covariates
    std::vector<double> y0_star;             // treatment-free outcome when known (simulation)
};

struct PanelDataset {
    std::size_t k_max = 0;
    std::vector<std::string> l_names;
    std::vector<std::string> v_names;
    std::vector<PanelSubject> subjects;

    std::size_t n_subjects() const { return subjects.size(); }
    bool has_y0() const { return !subjects.empty() && !subjects.front().y0_star.empty(); }

    void validate() const {
        for (const auto& s : subjects) {
            const std::size_t nv = k_max + 1;
            if (s.y_star.size() != nv || s.a_star.size() != nv || s.cum_a.size() != nv) {
                throw std::runtime_error("panel: subject " + s.id +
                                         " does not cover visits 0.." + std::to_string(k_max));
            }
            if (s.l_minus.size() != (l_names.empty() ? 0 : nv) ||
                (!l_names.empty() && s.l_minus.front().size() != l_names.size())) {
                throw std::runtime_error("panel: subject " + s.id + " covariate block misaligned");
            }
            if (s.v.size() != v_names.size()) {
                throw std::runtime_error("panel: subject " + s.id + " baseline block misaligned");
            }
            if (std::abs(s.cum_a[0]) > 1e-9) {
                throw std::runtime_error("panel: cum_a must start at 0 for subject " + s.id);
            }
            for (std::size_t k = 0; k <= k_max; ++k) {
                if (s.a_star[k] != 0 && s.a_star[k] != 1) {
                    throw std::runtime_error("panel: non-binary treatment for subject " + s.id +
                                             " at visit " + std::to_string(k));
                }
                if (k > 0) {
                    const double inc = s.cum_a[k] - s.cum_a[k - 1];
                    if (inc < -1e-9) {
                        throw std::runtime_error("panel: cum_a decreases for subject " + s.id +
                                                 " at visit " + std::to_string(k));
                    }
                    if (inc > 1.0 + 1e-9) {
                        throw std::runtime_error("panel: cum_a increment above one visit spacing"
                                                 " for subject " + s.id + " at visit " +
                                                 std::to_string(k));
                    }
                }
            }
        }
    }
};

// Project a continuous path onto integer visit times. Continuous quantities
// (outcome, covariates, exposure integral) are read as left limits — the value
// just before the visit — while the binary treatment state is right-continuous
// and includes a flip occurring exactly at the visit.
inline PanelSubject discretize(const ContinuousPath& path, const std::vector<int>& visit_times,
                               std::string id = "0") {
    if (visit_times.empty()) {
        throw std::invalid_argument("discretize: need at least one visit");
    }
    for (std::size_t k = 1; k < visit_times.size(); ++k) {
        if (visit_times[k] != visit_times[k - 1] + 1) {
            throw std::invalid_argument("discretize: visits must be consecutive integers");
        }
    }
    PanelSubject s;
    s.id = std::move(id);
    const bool with_l = !path.l_minus.empty();
    const bool with_y0 = !path.y0.empty();
    for (const int k : visit_times) {
        const std::size_t j = path.grid.index_of(static_cast<double>(k));
        s.y_star.push_back(path.y[j]);
        s.a_star.push_back(path.a[j]);
        s.cum_a.push_back(path.cum_a[j]);
        if (with_l) s.l_minus.push_back({path.l_minus[j]});
        if (with_y0) s.y0_star.push_back(path.y0[j]);
    }
    // exposure is counted from the first recorded visit
    const double base = s.cum_a.front();
    for (auto& c : s.cum_a) c -= base;
    return s;
}

inline PanelDataset discretize_dataset(const std::vector<ContinuousPath>& paths,
                                       std::size_t k_max) {
    PanelDataset panel;
    panel.k_max = k_max;
    std::vector<int> visits(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) visits[k] = static_cast<int>(k);
    if (!paths.empty() && !paths.front().l_minus.empty()) panel.l_names = {"lead"};
    panel.subjects.reserve(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        panel.subjects.push_back(discretize(paths[i], visits, std::to_string(i)));
    }
    panel.validate();
    return panel;
}

// --- CSV layer -------------------------------------------------------------
// Long format, one row per (id, visit); header mandatory. Required columns:
// id, visit, y, a, cum_a. Optional groups by prefix: l_<name> (time-varying
// covariates) and v_<name> (baseline covariates, constant within subject).

struct PanelSchema {
    std::string id = "id";
    std::string visit = "visit";
    std::string y = "y";
    std::string a = "a";
    std::string cum_a = "cum_a";
    std::string l_prefix = "l_";
    std::string v_prefix = "v_";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("panel csv: bad numeric field '" + s + "' on line " +
                                 std::to_string(line_no));
    }
    if (pos != s.size()) {
        throw std::runtime_error("panel csv: trailing characters in field '" + s + "' on line " +
                                 std::to_string(line_no));
    }
    return v;
}

inline std::string format_double(double v) {
    // shortest decimal that parses back to the same bits, so files stay
    // byte-stable and readable (0.95 prints as 0.95, not 0.949999...96)
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace detail

inline PanelDataset read_panel_csv(const std::string& path, const PanelSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("panel csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("panel csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);

    long id_col = -1, visit_col = -1, y_col = -1, a_col = -1, cum_col = -1;
    std::vector<std::pair<std::size_t, std::string>> l_cols, v_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h == schema.id) id_col = static_cast<long>(c);
        else if (h == schema.visit) visit_col = static_cast<long>(c);
        else if (h == schema.y) y_col = static_cast<long>(c);
        else if (h == schema.a) a_col = static_cast<long>(c);
        else if (h == schema.cum_a) cum_col = static_cast<long>(c);
        else if (h.rfind(schema.l_prefix, 0) == 0) l_cols.emplace_back(c, h.substr(schema.l_prefix.size()));
        else if (h.rfind(schema.v_prefix, 0) == 0) v_cols.emplace_back(c, h.substr(schema.v_prefix.size()));
        // unmapped columns are ignored
    }
    for (auto [col, name] : {std::pair<long, const char*>{id_col, "id"}, {visit_col, "visit"},
                             {y_col, "y"}, {a_col, "a"}, {cum_col, "cum_a"}}) {
        if (col < 0) {
            throw std::runtime_error("panel csv: missing required column '" + std::string(name) +
                                     "' in " + path);
        }
    }

    struct Row {
        long long visit;
        double y, a, cum;
        std::vector<double> l, v;
    };
    std::map<std::string, std::vector<Row>> by_id;
    std::vector<std::string> id_order;  // keep file order of first appearance
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("panel csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, header has " +
                                     std::to_string(header.size()));
        }
        Row r;
        const std::string& id = fields[static_cast<std::size_t>(id_col)];
        const double visit_raw = detail::parse_double(fields[static_cast<std::size_t>(visit_col)], line_no);
        r.visit = std::llround(visit_raw);
        if (std::abs(visit_raw - static_cast<double>(r.visit)) > 1e-9) {
            throw std::runtime_error("panel csv: non-integer visit on line " + std::to_string(line_no));
        }
        r.y = detail::parse_double(fields[static_cast<std::size_t>(y_col)], line_no);
        r.a = detail::parse_double(fields[static_cast<std::size_t>(a_col)], line_no);
        r.cum = detail::parse_double(fields[static_cast<std::size_t>(cum_col)], line_no);
        for (const auto& lc : l_cols) r.l.push_back(detail::parse_double(fields[lc.first], line_no));
        for (const auto& vc : v_cols) r.v.push_back(detail::parse_double(fields[vc.first], line_no));
        auto [it, fresh] = by_id.try_emplace(id);
        if (fresh) id_order.push_back(id);
        it->second.push_back(std::move(r));
    }
    if (by_id.empty()) {
        PanelDataset empty;
        for (const auto& lc : l_cols) empty.l_names.push_back(lc.second);
        for (const auto& vc : v_cols) empty.v_names.push_back(vc.second);
        return empty;
    }

    // visits are remapped so the earliest recorded visit is 0; every subject
    // must then cover the same consecutive range
    long long visit_min = by_id.begin()->second.front().visit;
    long long visit_max = visit_min;
    for (const auto& [id, rows] : by_id) {
        for (const auto& r : rows) {
            visit_min = std::min(visit_min, r.visit);
            visit_max = std::max(visit_max, r.visit);
        }
    }
    const std::size_t k_max = static_cast<std::size_t>(visit_max - visit_min);

    PanelDataset panel;
    panel.k_max = k_max;
    for (const auto& lc : l_cols) panel.l_names.push_back(lc.second);
    for (const auto& vc : v_cols) panel.v_names.push_back(vc.second);
    panel.subjects.reserve(by_id.size());
    for (const auto& id : id_order) {
        auto& rows = by_id[id];
        PanelSubject s;
        s.id = id;
        const std::size_t nv = k_max + 1;
        std::vector<char> seen(nv, 0);
        s.y_star.resize(nv);
        s.a_star.resize(nv);
        s.cum_a.resize(nv);
        if (!l_cols.empty()) s.l_minus.assign(nv, {});
        for (auto& r : rows) {
            const std::size_t k = static_cast<std::size_t>(r.visit - visit_min);
            if (seen[k]) {
                throw std::runtime_error("panel csv: duplicate visit " + std::to_string(k) +
                                         " for subject " + id);
            }
            seen[k] = 1;
            s.y_star[k] = r.y;
            if (r.a != 0.0 && r.a != 1.0) {
                throw std::runtime_error("panel csv: non-binary treatment for subject " + id +
                                         " at visit " + std::to_string(k));
            }
            s.a_star[k] = static_cast<int>(r.a);
            s.cum_a[k] = r.cum;
            if (!l_cols.empty()) s.l_minus[k] = std::move(r.l);
            if (!v_cols.empty()) {
                if (s.v.empty()) {
                    s.v = r.v;
                } else if (s.v != r.v) {
                    throw std::runtime_error("panel csv: baseline covariates vary within subject " +
                                             id);
                }
            }
        }
        for (std::size_t k = 0; k < nv; ++k) {
            if (!seen[k]) {
                throw std::runtime_error("panel csv: subject " + id + " is missing visit " +
                                         std::to_string(k));
            }
        }
        panel.subjects.push_back(std::move(s));
    }
    panel.validate();
    return panel;
}

inline void write_panel_csv(const PanelDataset& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("panel csv: cannot write " + path);
    out << "id,visit,y,a,cum_a";
    for (const auto& n : panel.l_names) out << ",l_" << n;
    for (const auto& n : panel.v_names) out << ",v_" << n;
    out << "\n";
    for (const auto& s : panel.subjects) {
        for (std::size_t k = 0; k <= panel.k_max; ++k) {
            out << s.id << ',' << k << ',' << detail::format_double(s.y_star[k]) << ','
                << s.a_star[k] << ',' << detail::format_double(s.cum_a[k]);
            for (std::size_t c = 0; c < panel.l_names.size(); ++c) {
                out << ',' << detail::format_double(s.l_minus[k][c]);
            }
            for (std::size_t c = 0; c < panel.v_names.size(); ++c) {
                out << ',' << detail::format_double(s.v[c]);
            }
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("panel csv: write failed for " + path);
}

}  // namespace ctgest
