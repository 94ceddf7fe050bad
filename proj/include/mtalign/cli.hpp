#pragma once

// Command-line front end: synth | polar | align | matrix | sequence.
// Exit codes: 0 success, 1 usage error, 2 data or processing error.

#include <mtalign/correlation.hpp>
#include <mtalign/error.hpp>
#include <mtalign/pgm.hpp>
#include <mtalign/pipeline.hpp>
#include <mtalign/polar.hpp>
#include <mtalign/sequencer.hpp>
#include <mtalign/synthgen.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mtalign {

inline constexpr const char* kToolVersion = "0.1.0";

namespace cli_detail {

namespace fs = std::filesystem;
using nlohmann::json;

/// Tracks outputs of one run and writes the run manifest.
class RunRecorder {
public:
    explicit RunRecorder(std::string command) : command_(std::move(command)) {}

    void param(const std::string& key, const std::string& value) { params_[key] = value; }
    void param(const std::string& key, double value) { params_[key] = format_real(value); }
    void param(const std::string& key, long long value) { params_[key] = std::to_string(value); }

    void output(const fs::path& p) { outputs_.push_back(p.string()); }

    void write(const fs::path& manifest)
    {
        output(manifest);
        json j;
        j["tool_version"] = kToolVersion;
        j["command"] = command_;
        j["parameters"] = params_;
        j["outputs"] = outputs_;
        write_text(manifest, j.dump(2) + "\n");
    }

    static void write_text(const fs::path& p, const std::string& text)
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + p.string());
        out << text;
        out.flush();
        if (!out)
            throw Error("I/O failure writing " + p.string());
    }

private:
    std::string command_;
    std::map<std::string, std::string> params_;
    std::vector<std::string> outputs_;
};

template <class Fn>
void write_stream(const fs::path& p, Fn&& fn)
{
    std::ostringstream ss;
    fn(ss);
    RunRecorder::write_text(p, ss.str());
}

inline std::string with_suffix(const fs::path& base, const std::string& suffix)
{
    fs::path p = base;
    p.replace_extension();
    return p.string() + suffix;
}

inline std::pair<double, double> parse_center(const std::string& text)
{
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw DomainError("--center expects 'x,y', got '" + text + "'");
    return {parse_real(text.substr(0, comma)), parse_real(text.substr(comma + 1))};
}

inline SquareTable load_square_csv(const fs::path& p)
{
    std::ifstream in(p);
    if (!in)
        throw Error("cannot open " + p.string());
    try {
        return read_square_csv(in);
    } catch (const FormatError& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

inline std::vector<std::string> read_lines(const fs::path& p)
{
    std::ifstream in(p);
    if (!in)
        throw Error("cannot open " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            lines.push_back(line);
    }
    return lines;
}

inline json report_json(const RotationEstimate& est)
{
    json j;
    j["angle_deg"] = est.angle_deg;
    j["peak_ncc"] = est.peak_ncc;
    j["shift"] = est.shift;
    if (est.pruning) {
        j["op_counts"] = {{"exhaustive", est.pruning->exhaustive_macs},
                          {"evaluated", est.pruning->evaluated_macs}};
    }
    return j;
}

}  // namespace cli_detail

/// SequencePlan as {"frames", "step_probs", "log_chain_prob"}; a -inf log
/// probability is written as null.
[[nodiscard]] inline nlohmann::json to_json(const SequencePlan& plan)
{
    nlohmann::json j;
    j["frames"] = plan.frames;
    j["step_probs"] = plan.step_probs;
    if (std::isfinite(plan.log_chain_prob))
        j["log_chain_prob"] = plan.log_chain_prob;
    else
        j["log_chain_prob"] = nullptr;
    return j;
}

[[nodiscard]] inline nlohmann::json to_json(const std::vector<MonotonicityViolation>& report)
{
    auto j = nlohmann::json::array();
    for (const auto& v : report)
        j.push_back({{"position", v.position}, {"expected_ge", v.expected_ge}, {"actual", v.actual}});
    return j;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr)
{
    namespace fs = std::filesystem;
    using cli_detail::RunRecorder;
    using nlohmann::json;

    CLI::App app{"Rotation registration and frame sequencing for noisy micrographs", "mtalign"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // synth
    FilamentSpec spec;
    std::string synth_out, synth_manifest;
    auto* synth = app.add_subcommand("synth", "Write a synthetic filament PGM");
    synth->add_option("--size", spec.size, "Square image size")->capture_default_str();
    synth->add_option("--angle", spec.orientation_deg, "Filament orientation (degrees)")->capture_default_str();
    synth->add_option("--half-length", spec.half_length, "Segment half length (pixels)")->capture_default_str();
    synth->add_option("--width-sigma", spec.width_sigma, "Gaussian cross-profile sigma")->capture_default_str();
    synth->add_option("--amplitude", spec.amplitude)->capture_default_str();
    synth->add_option("--background", spec.background)->capture_default_str();
    synth->add_option("--noise", spec.noise_sigma, "Gaussian noise sigma")->capture_default_str();
    synth->add_option("--seed", spec.seed)->capture_default_str();
    synth->add_option("--offset", spec.axial_offset, "Segment midpoint offset along its axis")->capture_default_str();
    synth->add_option("--out", synth_out, "Output PGM")->required();
    synth->add_option("--manifest", synth_manifest, "Run manifest path (default <out>.manifest.json)");

    // polar
    std::string polar_in, polar_out, polar_center, polar_manifest;
    PolarGrid polar_grid;
    std::optional<double> polar_radius;
    auto* polar = app.add_subcommand("polar", "Write the polar grid of a PGM as CSV");
    polar->add_option("--in", polar_in, "Input PGM")->required();
    polar->add_option("--out", polar_out, "Output CSV")->required();
    polar->add_option("--angular", polar_grid.angular, "Angular samples")->capture_default_str();
    polar->add_option("--radial", polar_grid.radial, "Radial samples")->capture_default_str();
    polar->add_option("--center", polar_center, "Center 'x,y' (default image center)");
    polar->add_option("--max-radius", polar_radius, "Outer radius (default min(w,h)/2 - 1)");
    polar->add_option("--manifest", polar_manifest);

    // align
    std::string align_ref, align_cand, align_report = "align_report.json", align_out, align_curve, align_manifest;
    AlignOptions align_opts;
    auto* align_cmd = app.add_subcommand("align", "Estimate the rotation of a candidate against a reference");
    align_cmd->add_option("--ref", align_ref, "Reference PGM")->required();
    align_cmd->add_option("--cand", align_cand, "Candidate PGM")->required();
    align_cmd->add_option("--report", align_report, "JSON report")->capture_default_str();
    align_cmd->add_option("--out", align_out, "Rotated candidate PGM (default <report>.aligned.pgm)");
    align_cmd->add_option("--curve", align_curve, "NCC curve CSV (default <report>.curve.csv)");
    align_cmd->add_flag("--pruned", align_opts.pruned, "Use the bound-pruned search");
    align_cmd->add_option("--angular", align_opts.grid.angular)->capture_default_str();
    align_cmd->add_option("--radial", align_opts.grid.radial)->capture_default_str();
    align_cmd->add_option("--max-radius", align_opts.max_radius);
    align_cmd->add_option("--crop-radius", align_opts.crop_radius);
    align_cmd->add_option("--manifest", align_manifest);

    // matrix
    std::string matrix_inputs, matrix_ref, matrix_out = "correlation.csv", matrix_prob = "probability.csv",
                matrix_aligned_dir, matrix_frames = "frames.txt", matrix_manifest;
    int matrix_crop = 64;
    AlignOptions matrix_opts;
    auto* matrix = app.add_subcommand("matrix", "Align a directory of PGMs and build the correlation matrix");
    matrix->add_option("--inputs", matrix_inputs, "Directory of PGM files")->required();
    matrix->add_option("--crop", matrix_crop, "Center crop size")->capture_default_str();
    matrix->add_option("--ref", matrix_ref, "Reference PGM (default first input)");
    matrix->add_option("--out-matrix", matrix_out, "Correlation CSV")->capture_default_str();
    matrix->add_option("--out-prob", matrix_prob, "Probability CSV")->capture_default_str();
    matrix->add_option("--aligned-dir", matrix_aligned_dir, "Write aligned PGMs here");
    matrix->add_option("--frames", matrix_frames, "Frame list in matrix index order")->capture_default_str();
    matrix->add_flag("--pruned", matrix_opts.pruned);
    matrix->add_option("--angular", matrix_opts.grid.angular)->capture_default_str();
    matrix->add_option("--radial", matrix_opts.grid.radial)->capture_default_str();
    matrix->add_option("--manifest", matrix_manifest);

    // sequence
    std::string seq_matrix, seq_plan = "sequence.json", seq_frames = "frames_order.txt", seq_paths, seq_mono,
                seq_manifest;
    std::size_t seq_start = 0;
    std::optional<std::size_t> seq_length;
    auto* sequence = app.add_subcommand("sequence", "Greedy frame sequence from a probability CSV");
    sequence->add_option("--matrix", seq_matrix, "Probability CSV")->required();
    sequence->add_option("--start", seq_start, "Start frame index")->capture_default_str();
    sequence->add_option("--length", seq_length, "Number of frames (default table size)");
    sequence->add_option("--plan", seq_plan, "SequencePlan JSON")->capture_default_str();
    sequence->add_option("--frames-out", seq_frames, "Ordered frame manifest")->capture_default_str();
    sequence->add_option("--paths", seq_paths, "Frame list mapping indices to paths");
    sequence->add_option("--monotonicity", seq_mono, "Monotonicity report JSON");
    sequence->add_option("--manifest", seq_manifest);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        err << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        err << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "mtalign: usage error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (synth->parsed()) {
            RunRecorder rec("synth");
            rec.param("size", static_cast<long long>(spec.size));
            rec.param("angle", spec.orientation_deg);
            rec.param("half_length", spec.half_length);
            rec.param("width_sigma", spec.width_sigma);
            rec.param("amplitude", spec.amplitude);
            rec.param("background", spec.background);
            rec.param("noise", spec.noise_sigma);
            rec.param("seed", std::to_string(spec.seed));
            rec.param("offset", spec.axial_offset);
            save_pgm(synth_filament(spec), synth_out);
            rec.output(synth_out);
            rec.write(synth_manifest.empty() ? synth_out + ".manifest.json" : synth_manifest);
        } else if (polar->parsed()) {
            RunRecorder rec("polar");
            const Image img = load_pgm(polar_in);
            auto [cx, cy] = std::pair{(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
            if (!polar_center.empty())
                std::tie(cx, cy) = cli_detail::parse_center(polar_center);
            const double max_r = polar_radius.value_or(default_max_radius(img));
            rec.param("in", polar_in);
            rec.param("angular", static_cast<long long>(polar_grid.angular));
            rec.param("radial", static_cast<long long>(polar_grid.radial));
            rec.param("center", format_real(cx) + "," + format_real(cy));
            rec.param("max_radius", max_r);
            const PolarImage p = to_polar(img, cx, cy, polar_grid.angular, polar_grid.radial, max_r);
            cli_detail::write_stream(polar_out, [&](std::ostream& o) { write_polar_csv(o, p); });
            rec.output(polar_out);
            rec.write(polar_manifest.empty() ? polar_out + ".manifest.json" : polar_manifest);
        } else if (align_cmd->parsed()) {
            RunRecorder rec("align");
            const std::string out = align_out.empty() ? cli_detail::with_suffix(align_report, ".aligned.pgm") : align_out;
            const std::string curve =
                align_curve.empty() ? cli_detail::with_suffix(align_report, ".curve.csv") : align_curve;
            rec.param("ref", align_ref);
            rec.param("cand", align_cand);
            rec.param("pruned", align_opts.pruned ? "true" : "false");
            rec.param("angular", static_cast<long long>(align_opts.grid.angular));
            rec.param("radial", static_cast<long long>(align_opts.grid.radial));
            if (align_opts.max_radius)
                rec.param("max_radius", *align_opts.max_radius);
            if (align_opts.crop_radius)
                rec.param("crop_radius", *align_opts.crop_radius);
            const Image ref = load_pgm(align_ref);
            const Image cand = load_pgm(align_cand);
            const Alignment result = align(ref, cand, align_opts);
            save_pgm(result.aligned, out);
            rec.output(out);
            cli_detail::write_stream(curve, [&](std::ostream& o) { write_curve_csv(o, result.estimate.curve); });
            rec.output(curve);
            RunRecorder::write_text(align_report, cli_detail::report_json(result.estimate).dump(2) + "\n");
            rec.output(align_report);
            rec.write(align_manifest.empty() ? align_report + ".manifest.json" : align_manifest);
        } else if (matrix->parsed()) {
            RunRecorder rec("matrix");
            std::vector<fs::path> inputs;
            if (!fs::is_directory(matrix_inputs))
                throw Error("not a directory: " + matrix_inputs);
            for (const auto& entry : fs::directory_iterator(matrix_inputs))
                if (entry.is_regular_file() && entry.path().extension() == ".pgm")
                    inputs.push_back(entry.path());
            std::sort(inputs.begin(), inputs.end(),
                      [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
            if (inputs.size() < 2)
                throw Error("need at least 2 .pgm files in " + matrix_inputs);
            const fs::path ref_path = matrix_ref.empty() ? inputs.front() : fs::path(matrix_ref);
            rec.param("inputs", matrix_inputs);
            rec.param("ref", ref_path.string());
            rec.param("crop", static_cast<long long>(matrix_crop));
            rec.param("pruned", matrix_opts.pruned ? "true" : "false");
            rec.param("angular", static_cast<long long>(matrix_opts.grid.angular));
            rec.param("radial", static_cast<long long>(matrix_opts.grid.radial));

            const PolarImage ref_polar = prepare_polar(load_pgm(ref_path), matrix_opts);
            std::vector<Image> registered;
            std::vector<std::string> frame_paths;
            if (!matrix_aligned_dir.empty())
                fs::create_directories(matrix_aligned_dir);
            for (const auto& in : inputs) {
                Alignment a = align(ref_polar, load_pgm(in), matrix_opts);
                if (!matrix_aligned_dir.empty()) {
                    const fs::path out = fs::path(matrix_aligned_dir) / in.filename();
                    save_pgm(a.aligned, out);
                    rec.output(out);
                    frame_paths.push_back(out.string());
                } else {
                    frame_paths.push_back(in.string());
                }
                registered.push_back(std::move(a.aligned));
            }
            const CorrelationMatrix c = correlation_matrix(registered, matrix_crop);
            const ProbabilityTable p = to_probability(c);
            cli_detail::write_stream(matrix_out, [&](std::ostream& o) { write_square_csv(o, c.values); });
            rec.output(matrix_out);
            cli_detail::write_stream(matrix_prob, [&](std::ostream& o) { write_square_csv(o, p.table()); });
            rec.output(matrix_prob);
            cli_detail::write_stream(matrix_frames, [&](std::ostream& o) {
                for (const auto& f : frame_paths)
                    o << f << '\n';
            });
            rec.output(matrix_frames);
            rec.write(matrix_manifest.empty() ? matrix_out + ".manifest.json" : matrix_manifest);
        } else if (sequence->parsed()) {
            RunRecorder rec("sequence");
            const ProbabilityTable p(cli_detail::load_square_csv(seq_matrix));
            const std::size_t length = seq_length.value_or(p.size());
            rec.param("matrix", seq_matrix);
            rec.param("start", static_cast<long long>(seq_start));
            rec.param("length", static_cast<long long>(length));
            std::vector<std::string> paths;
            if (!seq_paths.empty()) {
                paths = cli_detail::read_lines(seq_paths);
                if (paths.size() != p.size())
                    throw Error(seq_paths + ": lists " + std::to_string(paths.size()) + " frames, table has " +
                                std::to_string(p.size()));
                rec.param("paths", seq_paths);
            }
            const SequencePlan plan = greedy_sequence(p, seq_start, length);
            RunRecorder::write_text(seq_plan, to_json(plan).dump(2) + "\n");
            rec.output(seq_plan);
            cli_detail::write_stream(seq_frames, [&](std::ostream& o) {
                for (std::size_t f : plan.frames)
                    o << (paths.empty() ? std::to_string(f) : paths[f]) << '\n';
            });
            rec.output(seq_frames);
            if (!seq_mono.empty()) {
                if (plan.frames.size() < 2)
                    throw DomainError("monotonicity report needs a sequence of at least 2 frames");
                RunRecorder::write_text(seq_mono, to_json(check_monotonicity(p, plan.frames)).dump(2) + "\n");
                rec.output(seq_mono);
            }
            rec.write(seq_manifest.empty() ? seq_plan + ".manifest.json" : seq_manifest);
        }
    } catch (const std::exception& e) {
        err << "mtalign: error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace mtalign
