#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "resopt/errors.hpp"
#include "resopt/util.hpp"
#include "resopt/workflow.hpp"

namespace resopt {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

struct CsvFile {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    }
};

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    CsvFile csv;
    std::string line;
    if (std::getline(in, line)) csv.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        csv.rows.push_back(split_csv_line(line));
    }
    return csv;
}

std::map<std::string, std::string> read_provenance(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) return kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto sp = line.find(' ');
        if (sp == std::string::npos) continue;
        kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
    return kv;
}

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::istringstream ss(s);
    double v;
    while (ss >> v) out.push_back(v);
    return out;
}

} // namespace

std::vector<std::string> render_report(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("report: not a directory: " + dir);
    std::vector<std::string> written;
    std::ostringstream summary;

    // Baseline production per stress-sensitivity scenario, long format.
    const fs::path baseline = fs::path(dir) / "baseline.csv";
    if (fs::exists(baseline)) {
        const CsvFile csv = read_csv(baseline.string());
        const auto prov = read_provenance((fs::path(dir) / "baseline.prov.txt").string());
        std::vector<double> times;
        if (auto it = prov.find("step_end_times"); it != prov.end())
            times = parse_numbers(it->second);
        const fs::path out_path = fs::path(dir) / "fig5_baseline_long.csv";
        std::ofstream out(out_path);
        out << "scenario,step,time_days,cum_oil_m3\n";
        for (const auto& row : csv.rows) {
            for (std::size_t c = 1; c < row.size(); ++c) {
                const double t_days = c - 1 < times.size() ? times[c - 1] : 0.0;
                out << row[0] << ',' << c << ',' << fmt_g17(t_days) << ',' << row[c] << '\n';
            }
        }
        written.push_back(out_path.string());
        summary << "baseline: " << csv.rows.size() << " scenarios x "
                << (csv.header.size() - 1) << " control steps";
        if (!csv.rows.empty()) {
            summary << "; final-step cumulative (m3):";
            for (const auto& row : csv.rows) summary << ' ' << row[0] << '=' << row.back();
        }
        summary << "\n";
    }

    // Optimized trajectories (all cases) and problematic cases.
    const fs::path multi = fs::path(dir) / "multi_init.csv";
    if (fs::exists(multi)) {
        const CsvFile csv = read_csv(multi.string());
        const int c_init = csv.column("init");
        const int c_prob = csv.column("problematic");
        const int c_ood = csv.column("ood");
        const int c_div = csv.column("divergence");

        const fs::path fig6 = fs::path(dir) / "fig6_trajectories_long.csv";
        const fs::path fig9 = fs::path(dir) / "fig9_problematic_long.csv";
        std::ofstream out6(fig6);
        std::ofstream out9(fig9);
        out6 << "case,engine,step,time_days,bhp_pa\n";
        out9 << "case,ood,divergence,engine,step,time_days,bhp_pa\n";
        int n_problematic = 0;

        for (const auto& row : csv.rows) {
            if (c_init < 0) break;
            const std::string& name = row[c_init];
            for (const char* engine : {"physics", "proxy"}) {
                const fs::path traj_path =
                    fs::path(dir) / ("traj_" + name + "_" + engine + ".csv");
                if (!fs::exists(traj_path)) continue;
                const ControlTrajectory traj = read_trajectory_csv(traj_path.string());
                for (std::size_t t = 0; t < traj.size(); ++t) {
                    out6 << name << ',' << engine << ',' << (t + 1) << ','
                         << fmt_g17(traj.step_end_times[t]) << ',' << fmt_g17(traj.values[t])
                         << '\n';
                    if (c_prob >= 0 && row[c_prob] == "yes") {
                        out9 << name << ',' << (c_ood >= 0 ? row[c_ood] : "") << ','
                             << (c_div >= 0 ? row[c_div] : "") << ',' << engine << ',' << (t + 1)
                             << ',' << fmt_g17(traj.step_end_times[t]) << ','
                             << fmt_g17(traj.values[t]) << '\n';
                    }
                }
            }
            if (c_prob >= 0 && row[c_prob] == "yes") ++n_problematic;
        }
        written.push_back(fig6.string());
        written.push_back(fig9.string());
        summary << "multi-init: " << csv.rows.size() << " initializations, " << n_problematic
                << " problematic\n";
    }

    // Proxy-vs-simulator scatter per sampling strategy.
    {
        const fs::path fig7 = fs::path(dir) / "fig7_proxy_scatter_long.csv";
        std::ofstream out7;
        bool any = false;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string fname = entry.path().filename().string();
            if (fname.rfind("scatter_", 0) != 0 || entry.path().extension() != ".csv") continue;
            const std::string strategy = fname.substr(8, fname.size() - 8 - 4);
            const CsvFile csv = read_csv(entry.path().string());
            if (!any) {
                out7.open(fig7);
                out7 << "strategy,sample,J_sim_m3,J_proxy_m3\n";
                any = true;
            }
            for (const auto& row : csv.rows)
                if (row.size() >= 3) out7 << strategy << ',' << row[0] << ',' << row[1] << ',' << row[2] << '\n';
        }
        if (any) written.push_back(fig7.string());
    }

    // Sampling-strategy comparison, melted long format.
    const fs::path sampling = fs::path(dir) / "sampling.csv";
    if (fs::exists(sampling)) {
        const CsvFile csv = read_csv(sampling.string());
        const fs::path fig8 = fs::path(dir) / "fig8_sampling_long.csv";
        std::ofstream out(fig8);
        out << "strategy,metric,value\n";
        for (const auto& row : csv.rows)
            for (std::size_t c = 1; c < row.size() && c < csv.header.size(); ++c)
                out << row[0] << ',' << csv.header[c] << ',' << row[c] << '\n';
        written.push_back(fig8.string());
        summary << "sampling comparison: " << csv.rows.size() << " strategies\n";
    }

    const fs::path bench = fs::path(dir) / "benchmark.csv";
    if (fs::exists(bench)) {
        const auto prov = read_provenance((fs::path(dir) / "benchmark.prov.txt").string());
        summary << "benchmark:";
        for (const char* key : {"sim_eval_s", "proxy_eval_s", "physics_opt_s", "proxy_opt_s",
                                "eval_speedup", "opt_speedup"})
            if (auto it = prov.find(key); it != prov.end()) summary << ' ' << key << '=' << it->second;
        summary << "\n";
    }

    if (written.empty() && summary.str().empty())
        throw ConfigError("report: no study artifacts found in " + dir);

    const fs::path summary_path = fs::path(dir) / "summary.txt";
    std::ofstream out(summary_path);
    out << summary.str();
    written.push_back(summary_path.string());
    return written;
}

} // namespace resopt
