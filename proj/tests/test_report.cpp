#include <gtest/gtest.h>

#include <regex>

#include "fixtures.hpp"

using namespace winoforms;

namespace {

RunRecord rec(Kind k, double acc, std::size_t trial) {
  RunRecord r;
  r.kind = k;
  r.best_val_acc = acc;
  r.trial = trial;
  return r;
}

std::vector<RunRecord> sample_records() {
  std::vector<RunRecord> rs;
  const double mlm[] = {0.9, 0.85, 0.95, 0.9, 0.7};
  const double sent[] = {0.5, 0.6, 0.55, 0.65};
  for (std::size_t i = 0; i < 5; ++i) rs.push_back(rec(Kind::McMlm, mlm[i], i));
  for (std::size_t i = 0; i < 4; ++i) rs.push_back(rec(Kind::PSent, sent[i], i));
  return rs;
}

std::vector<std::string> matches(const std::string& text, const std::string& pattern) {
  std::vector<std::string> out;
  const std::regex re(pattern);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

}  // namespace

TEST(GroupRecords, LadderOrderSkippingErrors) {
  auto rs = sample_records();
  auto failed = rec(Kind::McSent, 0.0, 9);
  failed.error = "boom";
  rs.insert(rs.begin(), failed);
  const auto groups = group_records(rs);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].kind, Kind::McMlm);
  EXPECT_EQ(groups[1].kind, Kind::PSent);
  EXPECT_EQ(groups[1].accuracies.size(), 4u);
}

TEST(FormatNumber, FixedPrecision) {
  EXPECT_EQ(format_number(0.57735, 3), "0.577");
  EXPECT_EQ(format_number(-2.0, 3), "-2.000");
  EXPECT_EQ(format_number(-0.0001, 3), "0.000");
  EXPECT_EQ(format_number(std::optional<double>{}, 3), "n/a");
}

TEST(RenderTable, TwoPointGroup) {
  const std::vector<KindGroup> g = {{Kind::McSent, {0, 0, 1, 1}}};
  const auto t = render_table(g);
  EXPECT_EQ(t.csv, "formalization,n,std,kurt,median,p75,max\nMC-Sent,4,0.577,-2.000,0.500,1.000,1.000\n");
  EXPECT_NE(t.text.find("0.577"), std::string::npos);
  EXPECT_NE(t.text.find("-2.000"), std::string::npos);
  EXPECT_EQ(t.text.rfind("# ", 0), 0u);
}

TEST(RenderTable, TwoRunsHaveNoKurtosis) {
  const std::vector<KindGroup> g = {{Kind::PSpan, {0.5, 0.75}}};
  const auto t = render_table(g);
  EXPECT_EQ(t.csv, "formalization,n,std,kurt,median,p75,max\nP-Span,2,0.177,n/a,0.625,0.688,0.750\n");
  const std::vector<KindGroup> lonely = {{Kind::PSpan, {0.5}}};
  EXPECT_THROW(render_table(lonely), Error);
}

TEST(RenderTable, TestColumnWhenGiven) {
  const auto groups = group_records(sample_records());
  TableOptions opt;
  opt.test_accuracy[Kind::McMlm] = 0.875;
  const auto t = render_table(groups, opt);
  EXPECT_EQ(t.csv.substr(0, t.csv.find('\n')), "formalization,n,test,std,kurt,median,p75,max");
  EXPECT_NE(t.csv.find("MC-MLM,5,0.875,"), std::string::npos);
  EXPECT_NE(t.csv.find("P-Sent,4,n/a,"), std::string::npos);
}

TEST(RenderPlot, DeterministicAndAnnotated) {
  const auto groups = group_records(sample_records());
  PlotOptions opt;
  opt.majority = 0.5;
  opt.human = 0.96;
  const auto a = render_plot(groups, opt);
  EXPECT_EQ(a, render_plot(groups, opt));
  EXPECT_EQ(a.rfind("<?xml", 0), 0u);
  EXPECT_NE(a.find("class=\"perfect\""), std::string::npos);
  EXPECT_EQ(matches(a, "class=\"majority\" data-value=\"([^\"]+)\""), std::vector<std::string>{"0.500"});
  EXPECT_EQ(matches(a, "class=\"human\" data-value=\"([^\"]+)\""), std::vector<std::string>{"0.960"});
  EXPECT_EQ(matches(a, "data-kind=\"([^\"]+)\""), (std::vector<std::string>{"mc-mlm", "p-sent"}));

  const auto medians = matches(a, "class=\"median\" data-value=\"([^\"]+)\"");
  const auto p75s = matches(a, "class=\"p75\" data-value=\"([^\"]+)\"");
  ASSERT_EQ(medians.size(), groups.size());
  ASSERT_EQ(p75s.size(), groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto s = distribution_stats(groups[i].accuracies);
    EXPECT_EQ(medians[i], format_number(s.median, 3));
    EXPECT_EQ(p75s[i], format_number(s.p75, 3));
  }
  EXPECT_EQ(matches(a, "(<circle )").size(), 9u);

  PlotOptions other = opt;
  other.jitter_seed = 8;
  EXPECT_NE(render_plot(groups, other), a);
  EXPECT_EQ(render_plot(groups).find("class=\"majority\""), std::string::npos);
}

TEST(RenderPlot, RegeneratesFromRecordsFile) {
  const auto dir = winoforms::testing::scratch_dir("report");
  {
    std::ofstream f(dir / "records.jsonl");
    for (const auto& r : sample_records()) f << to_json(r).dump() << '\n';
  }
  auto render = [&] {
    const auto groups = group_records(load_records(dir / "records.jsonl"));
    return render_table(groups).csv + render_plot(groups);
  };
  const auto first = render();
  EXPECT_EQ(render(), first);
  write_text_file(dir / "out.svg", first);
  std::ifstream in(dir / "out.svg", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(in), {}), first);
  std::filesystem::remove_all(dir);
}

TEST(WriteTextFile, UnwritablePathIsAnError) {
  EXPECT_THROW(write_text_file("/nonexistent-dir/sub/out.svg", "x"), Error);
}
