use symplan::construct::{construct, Branch, ConstructConfig};
use symplan::cost::{plan_cost, Omega};
use symplan::generate::{family, generate_case, CaseKind, FamilySpec};
use symplan::measure::{uniform_box, Marginal};
use symplan::plan::{min_separation, Block};
use symplan::verify::{certify, VerifyConfig};

fn certify_identity(m: &Marginal, n: usize) -> symplan::verify::Certificate {
    let built = construct(m, n, &ConstructConfig::default()).unwrap();
    certify(&built.plan, m, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default())
}

#[test]
fn geometric_tail_with_cloud() {
    let kind = CaseKind::Geometric {
        k: 200,
        ratio: 0.9,
        diffuse: 0.3,
    };
    let m = generate_case(kind, 2, 3, 384, 17);
    let built = construct(&m, 3, &ConstructConfig::default()).unwrap();
    assert!(matches!(built.branches[0], Branch::Reduce { k: 200, .. }));
    let cert = certify(&built.plan, &m, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default());
    assert!(cert.passed, "{:?}", cert.failures);
    assert_eq!(cert.ledger.violations, 0);
}

#[test]
fn pure_cloud_is_one_map_block() {
    let m = Marginal::diffuse_only(2, uniform_box(&[0.0, 0.0], &[1.0, 1.0], 1.0, 120, 4)).unwrap();
    let built = construct(&m, 3, &ConstructConfig::default()).unwrap();
    assert_eq!(built.plan.blocks().len(), 1);
    assert!(matches!(built.plan.blocks()[0], Block::Map(_)));
    assert!(certify_identity(&m, 3).passed);
}

#[test]
fn finite_cost_for_several_profiles() {
    let m = generate_case(CaseKind::Atoms { k: 7, diffuse: 0.3 }, 3, 3, 200, 5);
    let plan = construct(&m, 3, &ConstructConfig::default()).unwrap().plan;
    assert!(min_separation(&plan) > 0.0);
    let table = Omega::table(vec![0.0, 0.5, 1.0], vec![0.0, 0.1, 1.0]).unwrap();
    for w in [Omega::Identity, Omega::power(0.5).unwrap(), Omega::power(3.0).unwrap(), table] {
        assert!(plan_cost(&plan, &w).is_finite(), "{w}");
    }
}

#[test]
fn reproducible_output() {
    let m = generate_case(CaseKind::Atoms { k: 9, diffuse: 0.3 }, 2, 4, 200, 8);
    let a = construct(&m, 4, &ConstructConfig::default()).unwrap().plan;
    let b = construct(&m, 4, &ConstructConfig::default()).unwrap().plan;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn cutoff_does_not_change_validity() {
    let m = generate_case(
        CaseKind::Geometric {
            k: 40,
            ratio: 0.85,
            diffuse: 0.0,
        },
        1,
        3,
        0,
        2,
    );
    for cutoff in [8, 64] {
        let cfg = ConstructConfig {
            cutoff,
            ..ConstructConfig::default()
        };
        let built = construct(&m, 3, &cfg).unwrap();
        let cert = certify(&built.plan, &m, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default());
        assert!(cert.passed, "cutoff {cutoff}: {:?}", cert.failures);
    }
}

#[test]
fn another_seed_of_the_family() {
    let spec = FamilySpec {
        seeds: vec![7],
        samples: 128,
        ..FamilySpec::default()
    };
    for c in family(&spec) {
        let cert = certify_identity(&c.marginal, c.n);
        assert!(cert.passed, "{}: {:?}", c.name, cert.failures);
    }
}
