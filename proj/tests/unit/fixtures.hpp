#pragma once

#include "fdamon/pipeline.hpp"
#include "fdamon/simulate.hpp"

// A small fitted model shared by several suites.
struct SmallFit {
  fdamon::SimulatedData sim;
  fdamon::ProfileBundle data;
  fdamon::FitOutcome fit;
};

inline const SmallFit& small_fit() {
  static const SmallFit f = [] {
    SmallFit out;
    fdamon::SimulationSpec spec;
    spec.days = 90;
    spec.outputs = 2;
    spec.seed = 81;
    out.sim = fdamon::simulate(spec);
    out.data = fdamon::ProfileBundle::from_records(out.sim.records);
    fdamon::PipelineOptions o;
    o.phase1 = fdamon::DayRange{1, 70};
    out.fit = fdamon::fit_bundle(out.data, o);
    return out;
  }();
  return f;
}
