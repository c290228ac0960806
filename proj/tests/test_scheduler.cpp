#include <gtest/gtest.h>

#include <set>

#include "fedauc/scheduler.hpp"

using namespace fedauc;

TEST(Plan, CyclicSequenceIsPeriodic) {
  auto plan = ParticipationPlan::cyclic(FederationLayout::contiguous(6, 3, 1));
  std::vector<int> seq;
  for (int e = 1; e <= 2; ++e)
    for (const auto& t : plan_epoch(plan, e, RngStream(e))) seq.push_back(t.group);
  EXPECT_EQ(seq, (std::vector<int>{0, 1, 2, 0, 1, 2}));
}

TEST(Plan, CustomOrderRepeatsEveryEpoch) {
  auto plan = ParticipationPlan::make(SchedulerMode::kCyclic, FederationLayout::contiguous(8, 4, 2), {2, 0, 3, 1});
  for (int e = 1; e <= 5; ++e) {
    auto tickets = plan_epoch(plan, e, RngStream(100 + e));
    std::vector<int> groups;
    for (const auto& t : tickets) groups.push_back(t.group);
    EXPECT_EQ(groups, (std::vector<int>{2, 0, 3, 1}));
  }
  EXPECT_THROW(ParticipationPlan::make(SchedulerMode::kCyclic, FederationLayout::contiguous(8, 4, 2), {0, 0, 1, 2}),
               ConfigError);
}

TEST(Plan, TicketsStayInsideTheirGroup) {
  auto layout = FederationLayout::contiguous(20, 4, 3);
  auto plan = ParticipationPlan::cyclic(layout);
  for (int e = 1; e <= 20; ++e) {
    for (const auto& t : plan_epoch(plan, e, RngStream(e))) {
      ASSERT_EQ(t.clients.size(), 3u);
      std::set<int> uniq(t.clients.begin(), t.clients.end());
      EXPECT_EQ(uniq.size(), 3u);
      EXPECT_TRUE(std::is_sorted(t.clients.begin(), t.clients.end()));
      for (int c : t.clients) EXPECT_EQ(layout.assignment[c], t.group);
      EXPECT_EQ(t.epoch, e);
    }
  }
}

TEST(Plan, FullGroupSample) {
  auto plan = ParticipationPlan::cyclic(FederationLayout::contiguous(9, 3, 3));
  auto groups = plan.layout.groups();
  for (const auto& t : plan_epoch(plan, 1, RngStream(4))) EXPECT_EQ(t.clients, groups[t.group]);
}

TEST(Plan, RandomSamplingIsDeterministic) {
  auto plan = ParticipationPlan::random_sampling(FederationLayout::contiguous(20, 4, 2));
  auto a = plan_epoch(plan, 3, RngStream(77));
  auto b = plan_epoch(plan, 3, RngStream(77));
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].clients, b[i].clients);
    EXPECT_EQ(a[i].group, int(i));
  }
}

TEST(Plan, RandomSamplingReachesWholePopulation) {
  auto plan = ParticipationPlan::random_sampling(FederationLayout::contiguous(12, 4, 2));
  std::set<int> seen;
  std::set<int> first_group_members;
  for (int e = 1; e <= 50; ++e) {
    auto tickets = plan_epoch(plan, e, RngStream(e));
    for (int c : tickets[0].clients) first_group_members.insert(c);
    for (const auto& t : tickets) seen.insert(t.clients.begin(), t.clients.end());
  }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_GT(first_group_members.size(), 3u);
}

TEST(Plan, SelectionFrequencyIsUniform) {
  auto plan = ParticipationPlan::cyclic(FederationLayout::contiguous(4, 1, 1));
  std::vector<int> counts(4, 0);
  RngStream root(5);
  for (int i = 0; i < 1000; ++i) ++counts[plan_epoch(plan, 1, root.fork(std::uint64_t(i)))[0].clients[0]];
  for (int c : counts) EXPECT_NEAR(c / 1000.0, 0.25, 0.05);
}

TEST(Plan, MLargerThanGroup) {
  FederationLayout bad{4, 2, 3, {0, 0, 1, 1}};
  EXPECT_THROW(ParticipationPlan::cyclic(bad), ConfigError);
}

TEST(Rounds, Totals) {
  EXPECT_EQ(rounds_total(1, 1), 1);
  EXPECT_EQ(rounds_total(5, 4), 20);
  EXPECT_THROW(rounds_total(0, 4), ConfigError);

  auto plan = ParticipationPlan::cyclic(FederationLayout::contiguous(20, 4, 2));
  std::size_t n = 0;
  for (int e = 1; e <= 7; ++e) n += plan_epoch(plan, e, RngStream(e)).size();
  EXPECT_EQ(long(n), rounds_total(7, 4));
}
