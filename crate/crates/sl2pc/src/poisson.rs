//! The holomorphic Poisson structure of sl2(C), its real and imaginary parts,
//! the Casimirs, the Cartan trivectors and the Euler identity.


use crate::error::{Error, Result};
use crate::exterior::{bit, differential, GradedField, Variance};
use crate::poly::{q, qr, Poly6, Q};

/// A complex-valued field stored as real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub re: GradedField,
    pub im: GradedField,
}

impl ComplexField {
    pub fn new(re: GradedField, im: GradedField) -> Self {
        ComplexField { re, im }
    }

    pub fn zero(variance: Variance, degree: usize) -> Self {
        ComplexField::new(GradedField::zero(variance, degree), GradedField::zero(variance, degree))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        Ok(ComplexField::new(self.re.add(&o.re)?, self.im.add(&o.im)?))
    }

    pub fn scale(&self, c: &Q) -> Result<Self> {
        Ok(ComplexField::new(self.re.scale(c)?, self.im.scale(c)?))
    }

    fn bilinear(
        &self,
        o: &Self,
        op: impl Fn(&GradedField, &GradedField) -> Result<GradedField>,
    ) -> Result<Self> {
        let re = op(&self.re, &o.re)?.sub(&op(&self.im, &o.im)?)?;
        let im = op(&self.re, &o.im)?.add(&op(&self.im, &o.re)?)?;
        Ok(ComplexField::new(re, im))
    }

    pub fn wedge(&self, o: &Self) -> Result<Self> {
        self.bilinear(o, |a, b| a.wedge(b))
    }

    pub fn schouten(&self, o: &Self) -> Result<Self> {
        self.bilinear(o, |a, b| a.schouten(b))
    }

    pub fn conj(&self) -> Result<Self> {
        Ok(ComplexField::new(self.re.clone(), self.im.scale(&q(-1))?))
    }
}

pub fn xv(j: usize) -> Poly6 {
    Poly6::var(2 * j)
}

pub fn yv(j: usize) -> Poly6 {
    Poly6::var(2 * j + 1)
}

/// The complex coordinate z_j (j = 0, 1, 2) as a complex function.
pub fn z_fn(j: usize, variance: Variance) -> ComplexField {
    ComplexField::new(
        GradedField::function(xv(j), variance),
        GradedField::function(yv(j), variance),
    )
}

/// ∂/∂z_j = ½(∂/∂x_j − i ∂/∂y_j).
pub fn d_z(j: usize) -> ComplexField {
    ComplexField::new(
        GradedField::basis(Variance::Multivector, &[2 * j], Poly6::constant(qr(1, 2))),
        GradedField::basis(Variance::Multivector, &[2 * j + 1], Poly6::constant(qr(-1, 2))),
    )
}

/// π_C = z1 ∂z2∧∂z3 + z2 ∂z3∧∂z1 + z3 ∂z1∧∂z2.
pub fn pi_c() -> ComplexField {
    let mut acc = ComplexField::zero(Variance::Multivector, 2);
    for j in 0..3 {
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        let term = z_fn(j, Variance::Multivector)
            .wedge(&d_z(a))
            .and_then(|t| t.wedge(&d_z(b)))
            .expect("bivector");
        acc = acc.add(&term).expect("same degree");
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonBivectors {
    pub pi_c: ComplexField,
    pub pi1: GradedField,
    pub pi2: GradedField,
}

pub fn poisson_bivectors() -> PoissonBivectors {
    let pc = pi_c();
    PoissonBivectors {
        pi1: pc.re.scale(&q(4)).unwrap(),
        pi2: pc.im.scale(&q(4)).unwrap(),
        pi_c: pc,
    }
}

/// The Casimir f = z1² + z2² + z3² as (f1, f2).
pub fn casimirs() -> (Poly6, Poly6) {
    let mut f1 = Poly6::zero();
    let mut f2 = Poly6::zero();
    for j in 0..3 {
        f1 = f1 + xv(j).pow(2) - yv(j).pow(2);
        f2 = f2 + (xv(j) * yv(j)).scale(&q(2));
    }
    (f1, f2)
}

/// φ = df1 ∧ df2.
pub fn phi_form() -> GradedField {
    let (f1, f2) = casimirs();
    differential(&f1).wedge(&differential(&f2)).unwrap()
}

fn tri(idx: [usize; 3], c: Q) -> GradedField {
    GradedField::basis(Variance::Multivector, &idx, Poly6::constant(c))
}

/// The two constant trivectors generating the degree-3 formal cohomology.
pub fn cartan_cocycles() -> (GradedField, GradedField) {
    let (x1, y1, x2, y2, x3, y3) = (0, 1, 2, 3, 4, 5);
    let h = qr(1, 2);
    let mh = qr(-1, 2);
    let cr = [
        tri([x1, x2, x3], h.clone()),
        tri([y1, y2, x3], mh.clone()),
        tri([x1, y2, y3], mh.clone()),
        tri([y1, x2, y3], mh.clone()),
    ];
    let ci = [
        tri([y1, y2, y3], h),
        tri([y1, x2, x3], mh.clone()),
        tri([x1, y2, x3], mh.clone()),
        tri([x1, x2, y3], mh),
    ];
    let sum = |v: &[GradedField]| v.iter().skip(1).fold(v[0].clone(), |a, b| a.add(b).unwrap());
    (sum(&cr), sum(&ci))
}

/// Which reading of the imaginary Euler component makes the identity hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum EulerConvention {
    /// E_C = Σ z_j ∂z_j read as a complex vector field: E2 = ½Σ(y ∂x − x ∂y).
    HolomorphicPart,
    /// E_C = E1 + iE2 with E1 = Σ(x∂x + y∂y) and E2 = Σ(x∂y − y∂x).
    RotationGenerator,
}

pub fn euler_fields(conv: EulerConvention) -> ComplexField {
    let mut e1 = GradedField::zero(Variance::Multivector, 1);
    let mut e2 = GradedField::zero(Variance::Multivector, 1);
    for j in 0..3 {
        let (xi, yi) = (2 * j, 2 * j + 1);
        let radial = GradedField::from_terms(
            Variance::Multivector,
            1,
            [(bit(xi), xv(j)), (bit(yi), yv(j))],
        );
        let rot = GradedField::from_terms(
            Variance::Multivector,
            1,
            [(bit(yi), xv(j)), (bit(xi), -yv(j))],
        );
        e1 = e1.add(&radial).unwrap();
        e2 = e2.add(&rot).unwrap();
    }
    match conv {
        EulerConvention::HolomorphicPart => ComplexField::new(
            e1.scale(&qr(1, 2)).unwrap(),
            e2.scale(&qr(-1, 2)).unwrap(),
        ),
        EulerConvention::RotationGenerator => ComplexField::new(e1, e2),
    }
}

/// The holomorphic Euler field Σ z_j ∂z_j, computed from the complex data.
pub fn holomorphic_euler() -> ComplexField {
    let mut acc = ComplexField::zero(Variance::Multivector, 1);
    for j in 0..3 {
        acc = acc.add(&z_fn(j, Variance::Multivector).wedge(&d_z(j)).unwrap()).unwrap();
    }
    acc
}

#[derive(Clone, Debug)]
pub struct EulerCheck {
    pub convention: EulerConvention,
    /// π2 − 2[π1, E2]
    pub residual: GradedField,
    /// [π1, E_C] − 2π_C
    pub complex_residual: ComplexField,
    pub tried: Vec<(EulerConvention, bool)>,
}

pub fn euler_identity_check() -> Result<EulerCheck> {
    let pb = poisson_bivectors();
    let mut tried = Vec::new();
    for conv in [EulerConvention::HolomorphicPart, EulerConvention::RotationGenerator] {
        let e = euler_fields(conv);
        let residual = pb.pi2.sub(&pb.pi1.schouten(&e.im)?.scale(&q(2))?)?;
        let lhs = ComplexField::new(pb.pi1.schouten(&e.re)?, pb.pi1.schouten(&e.im)?);
        let complex_residual = lhs.add(&pb.pi_c.scale(&q(-2))?)?;
        let ok = residual.is_zero() && complex_residual.re.is_zero() && complex_residual.im.is_zero();
        tried.push((conv, ok));
        if ok {
            return Ok(EulerCheck { convention: conv, residual, complex_residual, tried });
        }
    }
    Err(Error::NoConventionPasses)
}

/// Full real Euler field Σ x_i ∂_{x_i} on R^6.
pub fn real_euler() -> GradedField {
    GradedField::from_terms(Variance::Multivector, 1, (0..6).map(|i| (bit(i), Poly6::var(i))))
}

pub fn unit() -> Poly6 {
    Poly6::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{lichnerowicz, mask_of, poisson_bracket};

    fn x(i: usize) -> Poly6 {
        Poly6::var(i)
    }

    /// Hand expansion of 4 Re(π_C), written out coefficient by coefficient.
    fn pi1_by_hand() -> GradedField {
        let t = |a: usize, b: usize, c: Poly6| (mask_of(&[a, b]), c);
        // indices: x1=0 y1=1 x2=2 y2=3 x3=4 y3=5
        GradedField::from_terms(
            Variance::Multivector,
            2,
            [
                t(2, 4, x(0)),
                t(2, 5, x(1)),
                t(3, 4, x(1)),
                t(3, 5, -x(0)),
                t(0, 4, -x(2)),
                t(1, 4, -x(3)),
                t(0, 5, -x(3)),
                t(1, 5, x(2)),
                t(0, 2, x(4)),
                t(0, 3, x(5)),
                t(1, 2, x(5)),
                t(1, 3, -x(4)),
            ],
        )
    }

    fn pi2_by_hand() -> GradedField {
        let t = |a: usize, b: usize, c: Poly6| (mask_of(&[a, b]), c);
        GradedField::from_terms(
            Variance::Multivector,
            2,
            [
                t(2, 4, x(1)),
                t(2, 5, -x(0)),
                t(3, 4, -x(0)),
                t(3, 5, -x(1)),
                t(0, 4, -x(3)),
                t(1, 4, x(2)),
                t(0, 5, x(2)),
                t(1, 5, x(3)),
                t(0, 2, x(5)),
                t(0, 3, -x(4)),
                t(1, 2, -x(4)),
                t(1, 3, -x(5)),
            ],
        )
    }

    #[test]
    fn real_parts_match_hand_expansion() {
        let pb = poisson_bivectors();
        assert_eq!(pb.pi1, pi1_by_hand());
        assert_eq!(pb.pi2, pi2_by_hand());
    }

    #[test]
    fn brackets_vanish() {
        let pb = poisson_bivectors();
        assert!(pb.pi1.schouten(&pb.pi1).unwrap().is_zero());
        assert!(pb.pi2.schouten(&pb.pi2).unwrap().is_zero());
        assert!(pb.pi1.schouten(&pb.pi2).unwrap().is_zero());
    }

    #[test]
    fn casimirs_are_central() {
        let pb = poisson_bivectors();
        let (f1, f2) = casimirs();
        for f in [&f1, &f2] {
            let g = GradedField::function(f.clone(), Variance::Multivector);
            assert!(lichnerowicz(&pb.pi1, &g).unwrap().is_zero());
            assert!(lichnerowicz(&pb.pi2, &g).unwrap().is_zero());
        }
        // bracket convention: {z2, z3}_{π_C} = z1 gives {x2, x3}_{π1} = x1
        assert_eq!(poisson_bracket(&pb.pi1, &x(2), &x(4)).unwrap(), x(0));
    }

    #[test]
    fn cartan_contractions() {
        let pb = poisson_bivectors();
        let (f1, f2) = casimirs();
        let (cr, ci) = cartan_cocycles();
        assert_eq!(cr.contract_by(&differential(&f1)).unwrap(), pb.pi1);
        assert_eq!(cr.contract_by(&differential(&f2)).unwrap(), pb.pi2);
        assert!(lichnerowicz(&pb.pi1, &cr).unwrap().is_zero());
        assert!(lichnerowicz(&pb.pi1, &ci).unwrap().is_zero());
        let top = cr.wedge(&ci).unwrap();
        assert_eq!(top.degree(), 6);
        assert!(!top.is_zero());
        // 4·(∂z1∧∂z2∧∂z3) = C_R + i C_I
        let dz = d_z(0).wedge(&d_z(1)).unwrap().wedge(&d_z(2)).unwrap().scale(&q(4)).unwrap();
        assert_eq!(dz.re, cr);
        assert_eq!(dz.im, ci);
    }

    #[test]
    fn euler_identity() {
        let chk = euler_identity_check().unwrap();
        assert!(chk.residual.is_zero());
        assert_eq!(euler_fields(chk.convention), holomorphic_euler());
        let pb = poisson_bivectors();
        assert_eq!(pb.pi1.schouten(&real_euler()).unwrap(), pb.pi1);
    }
}
