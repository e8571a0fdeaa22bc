#include "slmc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace slmc::io {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    return is;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& path, int lineno) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) + ": malformed number '" + s + "'");
    }
}

int parse_int(const std::string& s, const std::string& path, int lineno) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) + ": malformed integer '" + s + "'");
    }
}

void expect_columns(const std::vector<std::string>& fields, size_t n, const std::string& path,
                    int lineno) {
    if (fields.size() != n)
        throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(n) +
                      " columns, got " + std::to_string(fields.size()));
}

}  // namespace

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_points_csv(const std::string& path, const std::vector<Point2>& points,
                      const CoarseningFlags& flags, bool include_coarsened_coords) {
    if (points.size() != flags.observed.size())
        throw IoError("write_points_csv: length mismatch");
    std::ofstream os = open_out(path);
    os << "id,x,y,observed,region\n";
    for (size_t i = 0; i < points.size(); ++i) {
        const bool obs = flags.observed[i];
        os << i << ',';
        if (obs || include_coarsened_coords)
            os << fmt(points[i].x) << ',' << fmt(points[i].y);
        else
            os << ',';
        os << ',' << (obs ? 1 : 0) << ',' << flags.region[i] << '\n';
    }
}

PointsFile read_points_csv(const std::string& path) {
    std::ifstream is = open_in(path);
    std::string line;
    int lineno = 0;
    PointsFile out;
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != "id,x,y,observed,region")
                throw IoError(path + ":1: unexpected header '" + line + "'");
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        expect_columns(f, 5, path, lineno);
        const int id = parse_int(f[0], path, lineno);
        if (id != static_cast<int>(out.points.size()))
            throw IoError(path + ":" + std::to_string(lineno) + ": ids must be 0,1,2,...");
        const bool obs = parse_int(f[3], path, lineno) != 0;
        Point2 p{0.0, 0.0};
        if (!f[1].empty() && !f[2].empty()) {
            p.x = parse_double(f[1], path, lineno);
            p.y = parse_double(f[2], path, lineno);
        } else if (obs) {
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": observed unit without coordinates");
        } else {
            out.has_all_coords = false;
        }
        out.points.push_back(p);
        out.flags.observed.push_back(obs ? 1 : 0);
        out.flags.region.push_back(parse_int(f[4], path, lineno));
    }
    return out;
}

void write_flags_csv(const std::string& path, const CoarseningFlags& flags) {
    std::ofstream os = open_out(path);
    os << "id,observed,region\n";
    for (int i = 0; i < flags.n(); ++i)
        os << i << ',' << (flags.observed[i] ? 1 : 0) << ',' << flags.region[i] << '\n';
}

void write_dataset_csv(const std::string& path, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& x) {
    if (y.size() != x.rows()) throw IoError("write_dataset_csv: dimension mismatch");
    std::ofstream os = open_out(path);
    os << "y";
    for (int j = 0; j < x.cols(); ++j) os << ",x" << j;
    os << '\n';
    for (int i = 0; i < y.size(); ++i) {
        os << fmt(y[i]);
        for (int j = 0; j < x.cols(); ++j) os << ',' << fmt(x(i, j));
        os << '\n';
    }
}

DatasetFile read_dataset_csv(const std::string& path) {
    std::ifstream is = open_in(path);
    std::string line;
    int lineno = 0;
    int k = -1;
    std::vector<double> ys;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (lineno == 1) {
            if (f.empty() || f[0] != "y")
                throw IoError(path + ":1: expected header starting with 'y'");
            k = static_cast<int>(f.size()) - 1;
            for (int j = 0; j < k; ++j)
                if (f[j + 1] != "x" + std::to_string(j))
                    throw IoError(path + ":1: expected column 'x" + std::to_string(j) + "'");
            continue;
        }
        expect_columns(f, static_cast<size_t>(k) + 1, path, lineno);
        ys.push_back(parse_double(f[0], path, lineno));
        std::vector<double> row(k);
        for (int j = 0; j < k; ++j) row[j] = parse_double(f[j + 1], path, lineno);
        rows.push_back(std::move(row));
    }
    if (k < 1) throw IoError(path + ": no data rows");
    DatasetFile out;
    out.y.resize(ys.size());
    out.x.resize(rows.size(), k);
    for (size_t i = 0; i < ys.size(); ++i) {
        out.y[i] = ys[i];
        for (int j = 0; j < k; ++j) out.x(i, j) = rows[i][j];
    }
    return out;
}

namespace {
nlohmann::json polygon_to_json(const Polygon& poly) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Point2& p : poly) arr.push_back({p.x, p.y});
    return arr;
}

Polygon polygon_from_json(const nlohmann::json& arr, const std::string& context) {
    if (!arr.is_array()) throw IoError(context + ": expected an array of [x,y] pairs");
    Polygon poly;
    for (const auto& v : arr) {
        if (!v.is_array() || v.size() != 2)
            throw IoError(context + ": expected [x,y] pairs");
        poly.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return poly;
}
}  // namespace

void write_partition_json(const std::string& path, const Partition& partition) {
    nlohmann::json j;
    j["window"] = polygon_to_json(partition.window().boundary());
    j["side"] = partition.side();
    nlohmann::json regions = nlohmann::json::array();
    nlohmann::json centroids = nlohmann::json::array();
    for (int r = 0; r < partition.size(); ++r) {
        regions.push_back(polygon_to_json(partition.region(r)));
        const Point2 c = partition.centroid(r);
        centroids.push_back({c.x, c.y});
    }
    j["regions"] = regions;
    j["centroids"] = centroids;
    std::ofstream os = open_out(path);
    os << j.dump(1) << '\n';
}

Partition read_partition_json(const std::string& path) {
    const nlohmann::json j = load_json(path);
    validate_keys(j, {"window", "side", "regions", "centroids"}, path);
    const Window window(polygon_from_json(j.at("window"), path + ": window"));
    const double side = j.at("side").get<double>();
    Partition part = build_hex_partition(window, side);
    if (j.contains("regions") &&
        j.at("regions").size() != static_cast<size_t>(part.size()))
        throw IoError(path + ": stored region count " + std::to_string(j.at("regions").size()) +
                      " does not match rebuilt partition (" + std::to_string(part.size()) + ")");
    return part;
}

void write_field_csv(const std::string& path, const IntensityField& field) {
    std::ofstream os = open_out(path);
    os << "x,y,value\n";
    for (int iy = 0; iy < field.ny; ++iy) {
        for (int ix = 0; ix < field.nx; ++ix) {
            const Point2 c = field.cell_center(ix, iy);
            os << fmt(c.x) << ',' << fmt(c.y) << ','
               << fmt(field.value[static_cast<size_t>(iy) * field.nx + ix]) << '\n';
        }
    }
}

void write_field_json(const std::string& path, const IntensityField& field) {
    nlohmann::json j;
    j["nx"] = field.nx;
    j["ny"] = field.ny;
    j["x0"] = field.x0;
    j["y0"] = field.y0;
    j["dx"] = field.dx;
    j["dy"] = field.dy;
    j["values"] = field.value;
    j["inside"] = field.inside;
    std::ofstream os = open_out(path);
    os << j.dump() << '\n';
}

IntensityField read_field_json(const std::string& path) {
    const nlohmann::json j = load_json(path);
    validate_keys(j, {"nx", "ny", "x0", "y0", "dx", "dy", "values", "inside"}, path);
    IntensityField f;
    f.nx = j.at("nx").get<int>();
    f.ny = j.at("ny").get<int>();
    f.x0 = j.at("x0").get<double>();
    f.y0 = j.at("y0").get<double>();
    f.dx = j.at("dx").get<double>();
    f.dy = j.at("dy").get<double>();
    f.value = j.at("values").get<std::vector<double>>();
    f.inside = j.at("inside").get<std::vector<unsigned char>>();
    if (f.value.size() != static_cast<size_t>(f.nx) * f.ny || f.value.size() != f.inside.size())
        throw IoError(path + ": value/mask size does not match grid dimensions");
    return f;
}

void write_weights_csv(const std::string& path, const WeightMatrix& w) {
    std::ofstream os = open_out(path);
    os << "i,j,w\n";
    for (int outer = 0; outer < w.w.outerSize(); ++outer)
        for (Eigen::SparseMatrix<double>::InnerIterator it(w.w, outer); it; ++it)
            os << it.row() << ',' << it.col() << ',' << fmt(it.value()) << '\n';
}

void write_estimates_csv(const std::string& path, const std::vector<EstimateRow>& rows) {
    std::ofstream os = open_out(path);
    os << "method,rho";
    int kmax = 0;
    for (const auto& r : rows) kmax = std::max(kmax, static_cast<int>(r.result.params.beta.size()));
    for (int j = 0; j < kmax; ++j) os << ",beta" << j;
    os << ",sigma2,D_beta1,M_beta1,T_beta1,converged,iterations,seconds\n";
    for (const auto& r : rows) {
        os << r.result.method << ',' << fmt(r.result.params.rho);
        for (int j = 0; j < kmax; ++j) {
            os << ',';
            if (j < r.result.params.beta.size()) os << fmt(r.result.params.beta[j]);
        }
        os << ',' << fmt(r.result.params.sigma2);
        if (r.has_impacts)
            os << ',' << fmt(r.impacts_beta1.direct) << ',' << fmt(r.impacts_beta1.indirect)
               << ',' << fmt(r.impacts_beta1.total);
        else
            os << ",,,";
        os << ',' << (r.result.converged ? 1 : 0) << ',' << r.result.iterations << ','
           << fmt(r.result.seconds) << '\n';
    }
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
    std::ofstream os = open_out(path);
    os << "method";
    for (const auto& q : table.quantities) os << ',' << q << "_rrmse," << q << "_rbias";
    os << ",used,skipped\n";
    for (size_t mi = 0; mi < table.methods.size(); ++mi) {
        os << table.methods[mi];
        for (size_t q = 0; q < table.quantities.size(); ++q)
            os << ',' << fmt(table.cells[mi][q].rmse) << ',' << fmt(table.cells[mi][q].bias);
        os << ',' << table.used[mi] << ',' << table.skipped[mi] << '\n';
    }
}

nlohmann::json metrics_to_json(const MetricsTable& table) {
    nlohmann::json j;
    j["scenario"] = table.scenario;
    j["replications"] = table.replications;
    j["seed"] = table.seed;
    j["quantities"] = table.quantities;
    nlohmann::json methods = nlohmann::json::array();
    for (size_t mi = 0; mi < table.methods.size(); ++mi) {
        nlohmann::json m;
        m["method"] = table.methods[mi];
        m["used"] = table.used[mi];
        m["skipped"] = table.skipped[mi];
        nlohmann::json cells = nlohmann::json::array();
        for (size_t q = 0; q < table.quantities.size(); ++q)
            cells.push_back({{"rrmse", table.cells[mi][q].rmse},
                             {"rbias", table.cells[mi][q].bias}});
        m["cells"] = cells;
        methods.push_back(m);
    }
    j["methods"] = methods;
    return j;
}

void write_metrics_json(const std::string& path, const MetricsTable& table,
                        const nlohmann::json& metadata) {
    nlohmann::json j = metrics_to_json(table);
    j["metadata"] = metadata;
    std::ofstream os = open_out(path);
    os << j.dump(1) << '\n';
}

void validate_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                   const std::string& context) {
    if (!obj.is_object()) throw IoError(context + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw IoError(context + ": unknown key '" + it.key() + "'");
    }
}

DmeConfig dme_from_json(const nlohmann::json& j, DmeConfig base) {
    validate_keys(j,
                  {"draws", "population", "elite_fraction", "smoothing", "max_iters",
                   "variance_tolerance", "bandwidth", "grid", "seed", "workers"},
                  "dme");
    if (j.contains("draws")) base.draws_per_eval = j.at("draws").get<int>();
    if (j.contains("population")) base.population = j.at("population").get<int>();
    if (j.contains("elite_fraction")) base.elite_fraction = j.at("elite_fraction").get<double>();
    if (j.contains("smoothing")) base.smoothing = j.at("smoothing").get<double>();
    if (j.contains("max_iters")) base.max_iters = j.at("max_iters").get<int>();
    if (j.contains("variance_tolerance"))
        base.variance_tolerance = j.at("variance_tolerance").get<double>();
    if (j.contains("bandwidth")) base.bandwidth_override = j.at("bandwidth").get<double>();
    if (j.contains("grid")) {
        base.grid_nx = j.at("grid").get<int>();
        base.grid_ny = base.grid_nx;
    }
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) base.workers = j.at("workers").get<int>();
    base.validate();
    return base;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base) {
    validate_keys(j,
                  {"id", "n", "rho", "beta", "sigma2", "hex_side", "kappa_threshold",
                   "coarsening", "replications", "seed", "window", "intensity", "dme",
                   "impact_mc_replicates", "impact_truncation"},
                  "scenario");
    if (j.contains("id")) base.id = j.at("id").get<std::string>();
    if (j.contains("n")) base.n = j.at("n").get<int>();
    if (j.contains("rho")) base.rho = j.at("rho").get<double>();
    if (j.contains("beta")) {
        const auto b = j.at("beta").get<std::vector<double>>();
        base.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    }
    if (j.contains("sigma2")) base.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("hex_side")) base.hex_side = j.at("hex_side").get<double>();
    if (j.contains("kappa_threshold"))
        base.kappa_threshold = j.at("kappa_threshold").get<double>();
    if (j.contains("coarsening")) {
        const auto& c = j.at("coarsening");
        validate_keys(c, {"kind", "probability", "mean", "range", "factor"}, "coarsening");
        if (c.contains("kind")) {
            const std::string kind = c.at("kind").get<std::string>();
            if (kind == "constant")
                base.coarsening.kind = CoarseningKind::Constant;
            else if (kind == "intensity")
                base.coarsening.kind = CoarseningKind::IntensityLinked;
            else if (kind == "intensity_inverse")
                base.coarsening.kind = CoarseningKind::IntensityInverse;
            else
                throw IoError("coarsening: unknown kind '" + kind + "'");
        }
        if (c.contains("probability"))
            base.coarsening.probability = c.at("probability").get<double>();
        if (c.contains("mean")) base.coarsening.mean = c.at("mean").get<double>();
        if (c.contains("range")) {
            const auto r = c.at("range").get<std::vector<double>>();
            if (r.size() != 2) throw IoError("coarsening: range must be [lo, hi]");
            base.coarsening.range_lo = r[0];
            base.coarsening.range_hi = r[1];
        }
        if (c.contains("factor")) base.coarsening.factor = c.at("factor").get<double>();
    }
    if (j.contains("replications")) base.replications = j.at("replications").get<int>();
    if (j.contains("seed")) base.base_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("window")) base.window_vertices = polygon_from_json(j.at("window"), "window");
    if (j.contains("intensity")) {
        const auto& in = j.at("intensity");
        validate_keys(in, {"baseline", "bumps"}, "intensity");
        if (in.contains("baseline")) base.intensity_baseline = in.at("baseline").get<double>();
        if (in.contains("bumps")) {
            base.intensity_bumps.clear();
            for (const auto& b : in.at("bumps")) {
                validate_keys(b, {"weight", "x", "y", "tau"}, "intensity bump");
                base.intensity_bumps.push_back(GaussianBump{
                    b.at("weight").get<double>(),
                    {b.at("x").get<double>(), b.at("y").get<double>()},
                    b.at("tau").get<double>()});
            }
        }
    }
    if (j.contains("dme")) base.dme = dme_from_json(j.at("dme"), base.dme);
    if (j.contains("impact_mc_replicates"))
        base.impact_mc_replicates = j.at("impact_mc_replicates").get<int>();
    if (j.contains("impact_truncation"))
        base.impact_truncation = j.at("impact_truncation").get<int>();
    return base;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream is = open_in(path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

}  // namespace slmc::io
