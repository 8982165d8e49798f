// Command-line front end: ingest, generate, score, evaluate.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "privscore/pipeline.hpp"

namespace ps = privscore;
namespace pl = privscore::pipeline;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void add_fit_flags(CLI::App* cmd, ps::FitConfig& fit) {
  cmd->add_option("--quadrature-nodes", fit.quadrature_nodes, "Gauss-Hermite nodes")->capture_default_str();
  cmd->add_option("--tolerance", fit.tolerance, "EM convergence tolerance")->capture_default_str();
  cmd->add_option("--max-iterations", fit.max_iterations, "EM iteration cap")->capture_default_str();
  cmd->add_option("--seed", fit.seed, "start jitter seed (0 = deterministic start)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy scores from sharing behaviour and social graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pl::kVersion);

  pl::IngestOptions ingest;
  std::string edges, granularity, responses, profiles;
  auto* c_ingest = app.add_subcommand("ingest", "validate raw inputs into a dataset bundle");
  c_ingest->add_option("--edges", edges, "edge CSV (source,target)");
  c_ingest->add_option("--granularity", granularity, "byte-count CSV (user_id,item_id,bytes)");
  c_ingest->add_option("--responses", responses, "binary CSV (user_id,item_id,shared)");
  c_ingest->add_option("--profiles", profiles, "profile text CSV (user_id,item_id,text)");
  c_ingest->add_option("--out", ingest.out, "bundle directory")->required();

  std::string gen_config, gen_out;
  auto* c_gen = app.add_subcommand("generate", "write a synthetic dataset bundle");
  c_gen->add_option("--config", gen_config, "generator JSON config")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen_out, "bundle directory")->required();

  pl::ScoreOptions score;
  std::string models = "psn,psi,psgn,psgi,psc,psna", score_out, centrality;
  auto* c_score = app.add_subcommand("score", "compute privacy scores for a bundle");
  c_score->add_option("bundle", score.bundle, "bundle directory")->required()->check(CLI::ExistingDirectory);
  c_score->add_option("--models", models, "comma list of psn,psi,psgn,psgi,psc[:prc|evc|cc|bc],psna")
      ->capture_default_str();
  c_score->add_option("--out", score_out, "output directory (default <bundle>/scores)");
  c_score->add_option("--damping", score.damping, "damping for PageRank and propagation")->capture_default_str();
  c_score->add_option("--levels", score.levels, "granularity levels per item")->capture_default_str();
  c_score->add_option("--intrinsic", score.intrinsic, "intrinsic model propagated by psna")->capture_default_str();
  c_score->add_option("--centrality", centrality, "restrict psc to one of prc, evc, cc, bc");
  c_score->add_flag("--literal-visibility", score.literal_visibility, "use the literal naive visibility denominators");
  c_score->add_flag("--normalized-betweenness", score.normalized_betweenness, "scale betweenness by 2/((N-1)(N-2))");
  add_fit_flags(c_score, score.fit);

  pl::EvaluateOptions eval;
  std::string k_groups = "3,4,6,8,10,12,14", eval_scores, eval_out;
  auto* c_eval = app.add_subcommand("evaluate", "goodness of fit, correlations and report tables");
  c_eval->add_option("bundle", eval.bundle, "bundle directory")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--scores", eval_scores, "score directory (default <bundle>/scores)");
  c_eval->add_option("--out", eval_out, "report directory (default <bundle>/report)");
  c_eval->add_option("--k-groups", k_groups, "comma list of group counts")->capture_default_str();
  c_eval->add_option("--alpha", eval.alpha, "significance level")->capture_default_str();
  c_eval->add_flag("--spearman", eval.spearman, "rank correlations instead of Pearson");
  std::string irt_expected = "rest";
  c_eval->add_option("--irt-expected", irt_expected,
                     "IRT test expectation: rest (leave-item-out posterior) or plugin (point estimate)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*c_ingest) {
      if (!edges.empty()) ingest.edges = edges;
      if (!granularity.empty()) ingest.granularity = granularity;
      if (!responses.empty()) ingest.responses = responses;
      if (!profiles.empty()) ingest.profiles = profiles;
      auto res = pl::cmd_ingest(ingest);
      for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "bundle " << ingest.out.string() << " manifest=" << res.manifest_hash << " users="
                << res.data.registry.size() << " items=" << res.data.catalog.size() << "\n";
    } else if (*c_gen) {
      auto res = pl::cmd_generate(gen_config, gen_out);
      std::cout << "bundle " << gen_out << " manifest=" << res.manifest_hash
                << " users=" << res.dataset.graph.nodes() << " edges=" << res.dataset.graph.edge_count() << "\n";
    } else if (*c_score) {
      score.models = split_list(models);
      if (!score_out.empty()) score.out = score_out;
      if (!centrality.empty()) score.centrality = centrality;
      auto run = pl::cmd_score(score);
      for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& [m, s] : run.scores) std::cout << "scored " << ps::to_string(m) << "\n";
      if (!run.converged) {
        std::cerr << "error: an iterative fit did not converge; results were written but are unreliable\n";
        return 2;
      }
    } else if (*c_eval) {
      eval.k_groups.clear();
      for (const auto& k : split_list(k_groups)) {
        std::size_t pos = 0;
        long v = -1;
        try {
          v = std::stol(k, &pos);
        } catch (const std::exception&) {
        }
        if (v < 0 || pos != k.size()) throw ps::ValidationError("--k-groups: not a count: '" + k + "'");
        eval.k_groups.push_back(static_cast<std::size_t>(v));
      }
      if (!eval_scores.empty()) eval.scores = eval_scores;
      eval.irt_expected = ps::parse_irt_expectation(irt_expected);
      if (!eval_out.empty()) eval.out = eval_out;
      auto rep = pl::cmd_evaluate(eval);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "report written (" << rep.gof.size() << " goodness-of-fit runs)\n";
    }
  } catch (const ps::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
