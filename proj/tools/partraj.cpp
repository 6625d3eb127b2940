#include "partraj/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char **argv)
{
    using namespace partraj::cli;

    CLI::App app{"Segment-parallel trajectory optimization"};
    app.require_subcommand(1);

    OptimizeArgs opt;
    std::string mode;
    double epsilon = 0.0;
    int threads = 0, maxIters = 0;
    auto *optimize = app.add_subcommand("optimize", "Solve a problem file with consensus ADMM");
    optimize->add_option("problem", opt.problem, "Problem JSON")->required();
    auto *modeOpt = optimize->add_option("--mode", mode, "closed-form or numerical");
    auto *epsOpt = optimize->add_option("--epsilon", epsilon, "Splitting tolerance per segment");
    auto *thrOpt = optimize->add_option("--threads", threads, "Worker count (0 = all cores)");
    auto *itOpt = optimize->add_option("--max-iters", maxIters, "Iteration cap");
    optimize->add_option("--trace", opt.trace, "Per-iteration CSV");
    optimize->add_option("--out", opt.out, "Coefficients JSON (stdout when omitted)");

    std::string coeffs, outPath;
    double dt = 0.0;
    auto *sample = app.add_subcommand("sample", "Sample a coefficients file on a uniform grid");
    sample->add_option("coeffs", coeffs, "Coefficients JSON")->required();
    sample->add_option("--dt", dt, "Grid step")->required();
    sample->add_option("--out", outPath, "CSV path (stdout when omitted)");

    std::string problem;
    auto *check = app.add_subcommand("check", "Report continuity gaps and constraint violations");
    check->add_option("coeffs", coeffs, "Coefficients JSON")->required();
    check->add_option("problem", problem, "Problem JSON")->required();

    BenchArgs bench;
    std::uint64_t seed = 1;
    auto *benchCmd = app.add_subcommand("bench", "Time synthetic corridor instances");
    benchCmd->add_option("--n", bench.counts, "Segment counts")->delimiter(',');
    benchCmd->add_option("--threads", bench.threads, "Worker counts")->delimiter(',');
    benchCmd->add_option("--reps", bench.repetitions, "Repetitions per configuration")->check(CLI::PositiveNumber);
    benchCmd->add_option("--seed", seed, "Instance seed");
    benchCmd->add_option("--epsilon", bench.epsilon, "Splitting tolerance per segment");
    benchCmd->add_option("--max-iters", bench.max_iters, "Iteration cap");
    benchCmd->add_option("--out", bench.out, "CSV path (stdout when omitted)");

    OracleArgs orc;
    bool pins = false, noPins = false;
    auto *oracle = app.add_subcommand("oracle", "Solve a small problem exactly");
    oracle->add_option("problem", orc.problem, "Problem JSON")->required();
    oracle->add_option("--method", orc.method, "auto, kkt or active-set");
    auto *pinFlag = oracle->add_flag("--pins", pins, "Force waypoint pins on");
    oracle->add_flag("--no-pins", noPins, "Force waypoint pins off")->excludes(pinFlag);
    oracle->add_option("--out", orc.out, "Coefficients JSON (stdout when omitted)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return kExitInvalidInput;
    }

    if (*optimize)
    {
        if (*modeOpt)
            opt.mode = mode;
        if (*epsOpt)
            opt.epsilon = epsilon;
        if (*thrOpt)
            opt.threads = threads;
        if (*itOpt)
            opt.max_iters = maxIters;
        return cmdOptimize(opt, std::cout, std::cerr);
    }
    if (*sample)
        return cmdSample(coeffs, dt, outPath, std::cout, std::cerr);
    if (*check)
        return cmdCheck(coeffs, problem, std::cout, std::cerr);
    if (*benchCmd)
    {
        bench.seed = seed;
        return cmdBench(bench, std::cout, std::cerr);
    }
    if (pins)
        orc.pins = true;
    if (noPins)
        orc.pins = false;
    return cmdOracle(orc, std::cout, std::cerr);
}
