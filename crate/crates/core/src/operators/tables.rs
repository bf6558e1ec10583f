// Boundary-closure tables for classical finite-difference SBP operators on
// uniform nodes, degrees 1 through 4, derived by solving the accuracy,
// quadrature, and M-symmetry conditions exactly in rational arithmetic.
// H weights match the standard diagonal-norm operators; remaining free
// closure parameters were fixed by maximizing the smallest nonzero
// eigenvalue of M + M^T and then shrinking coefficient magnitudes.
//
// Layout: H_BOUNDARY_p holds the first r diagonal norm weights (mirrored at
// the right end); Q_CLOSURE_p holds the first b rows of Q; HD2_CLOSURE_p
// holds the first b2 rows of H*D2 (times h^2, i.e. on unit spacing);
// D1_INTERIOR_p / D2_INTERIOR_p are the centered stencils; DB_ROW_p is the
// one-sided boundary-derivative stencil of degree p+1.

// degree p = 1
pub const H_BOUNDARY_1: [f64; 1] = [0.5];
pub const Q_CLOSURE_1: [[f64; 2]; 1] = [
    [-0.5, 0.5],
];
pub const HD2_CLOSURE_1: [[f64; 3]; 1] = [
    [0.5, -1.0, 0.5],
];
pub const D1_INTERIOR_1: [f64; 3] = [-0.5, 0.0, 0.5];
pub const D2_INTERIOR_1: [f64; 3] = [1.0, -2.0, 1.0];
#[allow(dead_code)] // reference data, cross-checked in tests
pub const DB_ROW_1: [f64; 3] = [-1.5, 2.0, -0.5];

// degree p = 2
pub const H_BOUNDARY_2: [f64; 4] = [0.3541666666666667, 1.2291666666666667, 0.8958333333333334, 1.0208333333333333];
pub const Q_CLOSURE_2: [[f64; 6]; 4] = [
    [-0.5, 0.6145833333333334, -0.08333333333333333, -0.03125, 0.0, 0.0],
    [-0.6145833333333334, 0.0, 0.6145833333333334, 0.0, 0.0, 0.0],
    [0.08333333333333333, -0.6145833333333334, 0.0, 0.6145833333333334, -0.08333333333333333, 0.0],
    [0.03125, 0.0, -0.6145833333333334, 0.0, 0.6666666666666666, -0.08333333333333333],
];
pub const HD2_CLOSURE_2: [[f64; 6]; 4] = [
    [0.7083333333333334, -1.7708333333333333, 1.4166666666666667, -0.3541666666666667, 0.0, 0.0],
    [1.2291666666666667, -2.4583333333333335, 1.2291666666666667, 0.0, 0.0, 0.0],
    [-0.08333333333333333, 1.2291666666666667, -2.2916666666666665, 1.2291666666666667, -0.08333333333333333, 0.0],
    [-0.020833333333333332, 0.0, 1.2291666666666667, -2.4583333333333335, 1.3333333333333333, -0.08333333333333333],
];
pub const D1_INTERIOR_2: [f64; 5] = [0.08333333333333333, -0.6666666666666666, 0.0, 0.6666666666666666, -0.08333333333333333];
pub const D2_INTERIOR_2: [f64; 5] = [-0.08333333333333333, 1.3333333333333333, -2.5, 1.3333333333333333, -0.08333333333333333];
#[allow(dead_code)] // reference data, cross-checked in tests
pub const DB_ROW_2: [f64; 4] = [-1.8333333333333333, 3.0, -1.5, 0.3333333333333333];

// degree p = 3
pub const H_BOUNDARY_3: [f64; 6] = [0.3159490740740741, 1.3903935185185186, 0.6275462962962963, 1.2405092592592593, 0.9116898148148148, 1.0139120370370371];
pub const Q_CLOSURE_3: [[f64; 9]; 6] = [
    [-0.5, 0.7671114060590739, -0.5433800378165423, 0.6057008437618506, -0.4656562723844436, 0.13622406038006152, 0.0, 0.0, 0.0],
    [-0.7671114060590739, 0.0, 1.6460754803438251, -2.1334896952555513, 1.7739164612564784, -0.5193908402856782, 0.0, 0.0, 0.0],
    [0.5433800378165423, -1.6460754803438251, 0.0, 2.8737867631567857, -2.5077180903172795, 0.7366267696877765, 0.0, 0.0, 0.0],
    [-0.6057008437618506, 2.1334896952555513, -2.8737867631567857, 0.0, 1.8920631346648127, -0.5627318896683943, 0.016666666666666666, 0.0, 0.0],
    [0.4656562723844436, -1.7739164612564784, 2.5077180903172795, -1.8920631346648127, 0.0, 0.825938566552901, -0.15, 0.016666666666666666, 0.0],
    [-0.13622406038006152, 0.5193908402856782, -0.7366267696877765, 0.5627318896683943, -0.825938566552901, 0.0, 0.75, -0.15, 0.016666666666666666],
];
pub const HD2_CLOSURE_3: [[f64; 9]; 6] = [
    [0.9106069459427064, -2.6836693747752607, 2.8924043359702747, -1.3653171446122498, 0.23506405070118663, 0.010911186773342922, 0.0, 0.0, 0.0],
    [1.3163306252247393, -2.526338697111351, 1.1132290917535659, 0.0454321736785329, 0.09315003970394342, -0.04180323324943066, 0.0, 0.0, 0.0],
    [-0.10759566402972552, 1.1132290917535659, -2.1218671341244155, 1.3897297884454034, -0.3287962213831955, 0.05530013933836749, 0.0, 0.0, 0.0],
    [-0.03198381127891646, 0.0454321736785329, 1.3897297884454034, -2.8925461464700946, 1.6052044003955412, -0.12694751588157738, 0.011111111111111112, 0.0, 0.0],
    [-0.014935949298813377, 0.09315003970394342, -0.3287962213831955, 1.6052044003955412, -2.6497183267409805, 1.4339849462123937, -0.15, 0.011111111111111112, 0.0],
    [0.010911186773342922, -0.04180323324943066, 0.05530013933836749, -0.12694751588157738, 1.4339849462123937, -2.692556634304207, 1.5, -0.15, 0.011111111111111112],
];
pub const D1_INTERIOR_3: [f64; 7] = [-0.016666666666666666, 0.15, -0.75, 0.0, 0.75, -0.15, 0.016666666666666666];
pub const D2_INTERIOR_3: [f64; 7] = [0.011111111111111112, -0.15, 1.5, -2.7222222222222223, 1.5, -0.15, 0.011111111111111112];
#[allow(dead_code)] // reference data, cross-checked in tests
pub const DB_ROW_3: [f64; 5] = [-2.0833333333333335, 4.0, -3.0, 1.3333333333333333, -0.25];

// degree p = 4
pub const H_BOUNDARY_4: [f64; 8] = [0.29489067617787856, 1.5257206238977072, 0.257452876984127, 1.7981137014991182, 0.4127080577601411, 1.278484623015873, 0.9232955798059965, 1.0093338608591584];
pub const Q_CLOSURE_4: [[f64; 12]; 8] = [
    [-0.5, 0.5904492638787638, 0.1628009719823923, -0.00992095982202392, -1.1561948832832714, 1.626572335620367, -0.8964673014652467, 0.1827605730890191, 0.0, 0.0, 0.0, 0.0],
    [-0.5904492638787638, 0.0, -0.24606031458212396, 0.15450691812502587, 3.6910786810061476, -5.531703295930708, 3.209868672507129, -0.6872413972467066, 0.0, 0.0, 0.0, 0.0],
    [-0.1628009719823923, 0.24606031458212396, 0.0, 0.35514000667038903, -2.6604465019826335, 4.419877212395373, -2.8731829061245273, 0.6753528464416666, 0.0, 0.0, 0.0, 0.0],
    [0.00992095982202392, -0.15450691812502587, -0.35514000667038903, 0.0, -1.4975212043959414, 3.8598293402576864, -2.3919139454787346, 0.52933177459038, 0.0, 0.0, 0.0, 0.0],
    [1.1561948832832714, -3.6910786810061476, 2.6604465019826335, 1.4975212043959414, 0.0, -5.531703295887391, 5.407917681000266, -1.4957268651971452, -0.0035714285714285713, 0.0, 0.0, 0.0],
    [-1.626572335620367, 5.531703295930708, -4.419877212395373, -3.8598293402576864, 5.531703295887391, 0.0, -2.1081521329597335, 0.9165006198912513, 0.0380952380952381, -0.0035714285714285713, 0.0, 0.0],
    [0.8964673014652467, -3.209868672507129, 2.8731829061245273, 2.3919139454787346, -5.407917681000266, 2.1081521329597335, 0.0, 0.5135462579553443, -0.2, 0.0380952380952381, -0.0035714285714285713, 0.0],
    [-0.1827605730890191, 0.6872413972467066, -0.6753528464416666, -0.52933177459038, 1.4957268651971452, -0.9165006198912513, -0.5135462579553443, 0.0, 0.8, -0.2, 0.0380952380952381, -0.0035714285714285713],
];
pub const HD2_CLOSURE_4: [[f64; 12]; 8] = [
    [1.079683670576112, -3.625301797429009, 4.853396110959159, -3.2775961438712224, 1.0628750013768327, -0.05594869498009147, -0.03929850293995044, 0.0021903563081696192, 0.0, 0.0, 0.0, 0.0],
    [1.374698202570991, -2.539654522711968, 1.11789757995883, -0.4790442954470579, 1.044457865943136, -0.6862074141489489, 0.18077023073744064, -0.012917646902423141, 0.0, 0.0, 0.0, 0.0],
    [-0.146603889040841, 1.11789757995883, -2.6632555212048428, 3.202212878560616, -2.373300277004696, 1.1068496191581543, -0.26753057198756575, 0.023730181560344774, 0.0, 0.0, 0.0, 0.0],
    [0.05573718946211093, -0.4790442954470579, 3.202212878560616, -5.531703296232001, 3.1291097815864704, -0.40594119847291216, 0.024407290758905627, 0.005221649783867551, 0.0, 0.0, 0.0, 0.0],
    [-0.1871249986231673, 1.044457865943136, -2.373300277004696, 3.1291097815864704, -2.2995883221162217, 0.5343598008621282, 0.22144970371964645, -0.06757784008158203, -0.0017857142857142857, 0.0, 0.0, 0.0],
    [0.14405130501990854, -0.6862074141489489, 1.1068496191581543, -0.40594119847291216, 0.5343598008621282, -1.709449656038108, 1.03604735417044, -0.0433209216617729, 0.025396825396825397, -0.0017857142857142857, 0.0, 0.0],
    [-0.03929850293995044, 0.18077023073744064, -0.26753057198756575, 0.024407290758905627, 0.22144970371964645, 1.03604735417044, -2.460515478506096, 1.4810588629360684, -0.2, 0.025396825396825397, -0.0017857142857142857, 0.0],
    [0.0021903563081696192, -0.012917646902423141, 0.023730181560344774, 0.005221649783867551, -0.06757784008158203, -0.0433209216617729, 1.4810588629360684, -2.8119957530537834, 1.6, -0.2, 0.025396825396825397, -0.0017857142857142857],
];
pub const D1_INTERIOR_4: [f64; 9] = [0.0035714285714285713, -0.0380952380952381, 0.2, -0.8, 0.0, 0.8, -0.2, 0.0380952380952381, -0.0035714285714285713];
pub const D2_INTERIOR_4: [f64; 9] = [-0.0017857142857142857, 0.025396825396825397, -0.2, 1.6, -2.8472222222222223, 1.6, -0.2, 0.025396825396825397, -0.0017857142857142857];
#[allow(dead_code)] // reference data, cross-checked in tests
pub const DB_ROW_4: [f64; 6] = [-2.283333333333333, 5.0, -5.0, 3.3333333333333335, -1.25, 0.2];
