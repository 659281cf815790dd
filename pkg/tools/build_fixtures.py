#!/usr/bin/env python3
"""Regenerates the committed few-shot corpus and scripted provider fixtures.

Run from the repository root after changing the canonical schema:

    python tools/build_fixtures.py
"""

import json
from pathlib import Path

from threatagent.model import model_from_dict, render_canonical

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
SCRIPTS = ROOT / "fixtures" / "scripts"
PROMPTS = ROOT / "fixtures" / "prompts"
DESCRIPTIONS = ROOT / "fixtures" / "descriptions"


def model_doc(model_id, title, narrative, tags, assets, entry_points,
              profiles, threats, vulnerabilities, mitigations, revision=0,
              produced_at="2025-01-01T00:00:00Z"):
    return {
        "model_id": model_id,
        "system": {"title": title, "narrative": narrative,
                   "components": [], "tags": tags},
        "assets": [
            {"id": i, "name": n, "description": d, "sensitivity": s}
            for i, n, d, s in assets
        ],
        "entry_points": [
            {"id": i, "name": n, "channel": c, "exposed_to": e}
            for i, n, c, e in entry_points
        ],
        "attacker_profiles": [
            {"id": i, "label": l, "motivation": m, "capability": c, "access": a}
            for i, l, m, c, a in profiles
        ],
        "threats": [
            {"id": i, "title": t, "description": d, "stride": s,
             "attack_technique_ids": tech, "cve_ids": cves,
             "target_asset_ids": targets, "via_entry_point_ids": eps,
             "severity": sev}
            for i, t, d, s, tech, cves, targets, eps, sev in threats
        ],
        "vulnerabilities": [
            {"id": i, "description": d, "cve_ids": c, "affected_asset_ids": a}
            for i, d, c, a in vulnerabilities
        ],
        "mitigations": [
            {"id": i, "description": d, "nist_control_ids": n,
             "addresses_threat_ids": t}
            for i, d, n, t in mitigations
        ],
        "revision": revision,
        "produced_at": produced_at,
    }


def render(doc):
    return render_canonical(model_from_dict(doc))


# ---------------------------------------------------------------------------
# drone model used by the scripted end-to-end fixtures

DRONE_NARRATIVE = (
    "Customer orders are processed through a mobile application connected "
    "to a scheduling server. The server assigns delivery tasks to drones, "
    "which navigate autonomously using a GPS-based navigation system. "
    "Package status is updated in real time via the tracking module, and "
    "operational data from drones is continuously monitored through a "
    "cloud-based dashboard.")


def drone_model(revision, with_mitigations=True):
    mitigations = [
        ("M1", "Mutual TLS and signed API requests between the mobile app and the scheduling server.",
         ["SC-8", "IA-2"], ["T1"]),
        ("M2", "GPS signal authentication and inertial cross-checking on drones.",
         ["SI-2", "CM-6"], ["T2"]),
        ("M3", "Role-based access control and least privilege on the dashboard.",
         ["AC-2", "AC-6"], ["T3"]),
        ("M4", "Rate limiting and redundant scheduling capacity.",
         ["SC-7", "IR-4"], ["T4"]),
    ] if with_mitigations else []
    return model_doc(
        model_id="drone-delivery",
        title="Drone Delivery Management System",
        narrative=DRONE_NARRATIVE,
        tags=["transport", "drone", "iot"],
        assets=[
            ("A1", "Customer order data", "Orders, addresses and payment references handled by the mobile app.", "high"),
            ("A2", "Drone fleet", "Autonomous delivery drones and their navigation firmware.", "critical"),
            ("A3", "Scheduling server", "Central service assigning delivery tasks.", "critical"),
        ],
        entry_points=[
            ("E1", "Mobile application API", "api", "public"),
            ("E2", "Drone radio link", "wireless", "physical_proximity"),
            ("E3", "Operations dashboard", "web", "authenticated"),
        ],
        profiles=[
            ("P1", "Opportunistic hijacker", "Steal packages by diverting drones.", "opportunistic", "external"),
            ("P2", "Malicious insider", "Disgruntled operator abusing dashboard access.", "skilled", "insider"),
        ],
        threats=[
            ("T1", "Order tampering via API", "An attacker manipulates order requests to redirect deliveries.",
             "tampering", ["T1190"], ["CVE-2017-5638"], ["A1", "A3"], ["E1"], "high"),
            ("T2", "GPS spoofing of drones", "Forged GPS signals divert drones from their route.",
             "spoofing", ["T1557"], [], ["A2"], ["E2"], "critical"),
            ("T3", "Dashboard credential theft", "Stolen operator credentials expose fleet telemetry.",
             "information_disclosure", ["T1078", "T1110"], ["CVE-2018-13379"], ["A3"], ["E3"], "high"),
            ("T4", "Scheduling denial of service", "Request floods exhaust the scheduling server.",
             "denial_of_service", ["T1499"], [], ["A3"], ["E1"], "medium"),
        ],
        vulnerabilities=[
            ("V1", "Unpatched web framework on the scheduling server.",
             ["CVE-2017-5638"], ["A3"]),
        ],
        mitigations=mitigations,
        revision=revision,
    )


def fenced(doc):
    return "```threatmodel-json\n" + render(doc) + "```\n"


def write_scripts():
    SCRIPTS.mkdir(parents=True, exist_ok=True)
    full = drone_model(0)
    refined = drone_model(1)
    draft = drone_model(0, with_mitigations=False)

    def dump(name, responses):
        (SCRIPTS / name).write_text(
            json.dumps({"responses": responses}, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")

    dump("happy_path.json", [
        {"response": "Here is the threat model you asked for.\n\n" + fenced(full)},
    ])
    dump("one_repair.json", [
        {"response": "Sure! The system faces several notable risks; "
                     "let me describe them in prose first."},
        {"response": fenced(full)},
    ])
    dump("one_clarify_round.json", [
        {"response": fenced(draft)},
        {"response": fenced(refined)},
    ])
    dump("garbage.json", [
        {"response": "I am unable to help with that."},
        {"response": "Still no structured output here."},
        {"response": "Nope."},
    ])
    dump("bench.json", [
        {"response": fenced(full), "delay_ms": 100} for _ in range(15)
    ])


SIMPLE_PROMPT = (
    "Generate a threat model for a Drone Delivery Management System where "
    "customer orders are processed through a mobile application connected "
    "to a scheduling server. The server assigns delivery tasks to drones, "
    "which navigate autonomously using a GPS-based navigation system. "
    "Package status is updated in real time via the tracking module, and "
    "operational data from drones is continuously monitored through a "
    "cloud-based dashboard. Consider the interactions and data flow "
    "between these components when identifying assets, entry points, "
    "threats, vulnerabilities, attacker models, and mitigation.")
COMPOUND_PROMPT = (
    "Generate a threat model for a Drone Delivery Management System. The "
    "main components include the drone navigation system, delivery "
    "scheduling server, package tracking module, customer mobile "
    "application, and cloud-based monitoring dashboard.")
COMPLEX_PROMPT = "Generate a threat model for a Drone Delivery Management System."


def write_prompts():
    PROMPTS.mkdir(parents=True, exist_ok=True)
    (PROMPTS / "simple.txt").write_text(
        "Drone Delivery Management System\n" + SIMPLE_PROMPT + "\n")
    (PROMPTS / "compound.txt").write_text(
        "Drone Delivery Management System\n" + COMPOUND_PROMPT + "\n")
    (PROMPTS / "complex.txt").write_text(
        "Drone Delivery Management System\n" + COMPLEX_PROMPT + "\n")
    DESCRIPTIONS.mkdir(parents=True, exist_ok=True)
    (DESCRIPTIONS / "drone.txt").write_text(
        "Drone Delivery Management System\n" + SIMPLE_PROMPT + "\n")


# ---------------------------------------------------------------------------
# few-shot corpus: 12 examples across 6 domains, all three complexity classes

def small_model(model_id, title, narrative, tags, domain_bits):
    """One compact but fully cross-referenced model per corpus example."""
    a1, a2, ep, threat1, threat2 = domain_bits
    return model_doc(
        model_id=model_id,
        title=title,
        narrative=narrative,
        tags=tags,
        assets=[
            ("A1", a1[0], a1[1], a1[2]),
            ("A2", a2[0], a2[1], a2[2]),
        ],
        entry_points=[("E1", ep[0], ep[1], ep[2])],
        profiles=[
            ("P1", "External attacker", "Financial gain or disruption.",
             "skilled", "external"),
            ("P2", "Malicious insider", "Abuse of legitimate access.",
             "opportunistic", "insider"),
        ],
        threats=[
            ("T1", threat1[0], threat1[1], threat1[2], threat1[3], threat1[4],
             ["A1"], ["E1"], threat1[5]),
            ("T2", threat2[0], threat2[1], threat2[2], threat2[3], threat2[4],
             ["A2"], ["E1"], threat2[5]),
        ],
        vulnerabilities=[
            ("V1", "Unpatched software component in the exposed service.",
             threat1[4] or ["CVE-2021-44228"], ["A1"]),
        ],
        mitigations=[
            ("M1", "Strong authentication and transport encryption on the exposed interface.",
             ["IA-2", "SC-8"], ["T1"]),
            ("M2", "Monitoring, least privilege and timely patching.",
             ["AU-6", "AC-6", "SI-2"], ["T2"]),
        ],
    )


CORPUS_EXAMPLES = [
    # (id, tags, complexity, prompt, title, narrative, bits)
    ("ex01-hospital-ehr", ["healthcare", "web"], "simple",
     "Generate a threat model for a hospital records platform where clinicians "
     "access patient charts through a web application connected to a records "
     "server, and lab results are updated through an integration interface.",
     "Hospital Electronic Health Records Platform",
     "Clinicians access patient charts through a web application connected to "
     "a central records server; lab results are updated via an integration "
     "interface and access is monitored by the security team.",
     (("Patient health records", "Longitudinal medical histories.", "critical"),
      ("Clinician credentials", "Accounts with chart access.", "high"),
      ("Clinical web portal", "web", "authenticated"),
      ("Record snooping", "Unauthorized browsing of patient charts.",
       "information_disclosure", ["T1078"], [], "high"),
      ("Chart tampering", "Alteration of medication orders.",
       "tampering", ["T1565"], [], "critical"))),
    ("ex02-telehealth", ["healthcare", "mobile", "video"], "compound",
     "Generate a threat model for a telehealth service. The main components "
     "include a patient mobile application, a video consultation service, and "
     "an appointment database.",
     "Telehealth Consultation Service",
     "Patients book and attend remote consultations. The main components "
     "include a patient mobile application, a video consultation service, "
     "and an appointment database.",
     (("Consultation recordings", "Stored video sessions.", "critical"),
      ("Appointment database", "Bookings and contact details.", "high"),
      ("Patient mobile app", "mobile_app", "public"),
      ("Session eavesdropping", "Interception of consultation traffic.",
       "information_disclosure", ["T1040"], [], "high"),
      ("Booking flood", "Automated bookings exhaust appointment slots.",
       "denial_of_service", ["T1499"], [], "medium"))),
    ("ex03-ride-hailing", ["transport", "mobile"], "simple",
     "Generate a threat model for a ride hailing platform where riders request "
     "trips through a mobile application connected to a dispatch server, and "
     "driver locations are continuously monitored through a tracking module.",
     "Ride Hailing Platform",
     "Riders request trips through a mobile application connected to a "
     "dispatch server; the server assigns trips to drivers and locations are "
     "continuously monitored through a tracking module.",
     (("Trip and location history", "Rider and driver movement data.", "high"),
      ("Dispatch server", "Assigns trips and sets pricing.", "critical"),
      ("Rider mobile API", "api", "public"),
      ("Fake driver spoofing", "Impersonation of registered drivers.",
       "spoofing", ["T1078"], [], "high"),
      ("Surge manipulation", "Forged demand signals distort pricing.",
       "tampering", ["T1565"], [], "medium"))),
    ("ex04-rail-signaling", ["transport", "ot", "safety"], "complex",
     "Generate a threat model for a regional railway signaling system.",
     "Regional Railway Signaling System",
     "A regional railway operator runs centralized signaling that controls "
     "track-side equipment over a dedicated network, with an operator "
     "console in the control centre.",
     (("Signaling commands", "Safety-critical movement authorities.", "critical"),
      ("Operator console", "Control-centre workstation.", "high"),
      ("Track-side network", "network_port", "internal"),
      ("Command injection", "Forged signaling commands on the field network.",
       "tampering", ["T1557"], [], "critical"),
      ("Console takeover", "Privilege escalation on the operator console.",
       "elevation_of_privilege", ["T1068"], ["CVE-2021-3156"], "high"))),
    ("ex05-smart-meters", ["iot", "energy"], "compound",
     "Generate a threat model for a smart metering deployment. The main "
     "components include household smart meters, a head-end collection "
     "server, and a billing database.",
     "Smart Metering Deployment",
     "Household smart meters report consumption to a head-end collection "
     "server. The main components include the meters, the head-end server, "
     "and a billing database.",
     (("Consumption records", "Per-household usage data.", "medium"),
      ("Head-end server", "Collects and commands meters.", "critical"),
      ("Meter radio network", "wireless", "physical_proximity"),
      ("Meter impersonation", "Cloned meters submit forged readings.",
       "spoofing", ["T1078"], [], "medium"),
      ("Remote disconnect abuse", "Mass disconnect commands cut power.",
       "denial_of_service", ["T1499"], [], "critical"))),
    ("ex06-factory-sensors", ["iot", "manufacturing"], "simple",
     "Generate a threat model for a factory monitoring system where vibration "
     "sensors send readings to an aggregation gateway connected to an "
     "analytics server, and alerts are monitored through a dashboard.",
     "Factory Condition Monitoring System",
     "Vibration sensors send readings to an aggregation gateway connected to "
     "an analytics server; maintenance alerts are continuously monitored "
     "through a plant dashboard.",
     (("Sensor telemetry", "Machine-health readings.", "medium"),
      ("Analytics server", "Predictive maintenance models.", "high"),
      ("Plant gateway", "network_port", "internal"),
      ("Telemetry flooding", "Rogue devices flood the gateway.",
       "denial_of_service", ["T1499"], [], "medium"),
      ("Model poisoning", "Tampered readings skew maintenance predictions.",
       "tampering", ["T1565"], [], "high"))),
    ("ex07-retail-bank", ["finance", "web"], "simple",
     "Generate a threat model for an online retail bank where customers log "
     "in through a web application connected to a core banking server, and "
     "transactions are processed through a payments gateway.",
     "Online Retail Banking Portal",
     "Customers authenticate through a web application connected to the core "
     "banking server; payments are processed through a gateway and fraud "
     "signals are continuously monitored.",
     (("Customer balances", "Account and transaction data.", "critical"),
      ("Payment gateway", "Initiates interbank transfers.", "critical"),
      ("Internet banking portal", "web", "public"),
      ("Credential stuffing", "Reused passwords tried at scale.",
       "spoofing", ["T1110"], [], "high"),
      ("Transaction repudiation", "Customers deny initiated transfers.",
       "repudiation", [], [], "medium"))),
    ("ex08-crypto-exchange", ["finance", "api"], "complex",
     "Generate a threat model for a cryptocurrency exchange.",
     "Cryptocurrency Exchange",
     "A cryptocurrency exchange holds customer wallets, matches orders, and "
     "exposes trading programmatically to market makers.",
     (("Hot wallet keys", "Signing keys for withdrawals.", "critical"),
      ("Order matching engine", "Central limit order book.", "critical"),
      ("Trading API", "api", "public"),
      ("Key exfiltration", "Theft of hot wallet signing keys.",
       "information_disclosure", ["T1078"], [], "critical"),
      ("Order book manipulation", "Forged orders distort prices.",
       "tampering", ["T1565"], [], "high"))),
    ("ex09-campus-lms", ["education", "web"], "compound",
     "Generate a threat model for a university learning platform. The main "
     "components include a student web portal, a grading service, and an "
     "exam proctoring module.",
     "University Learning Management System",
     "Students and staff use the platform daily. The main components include "
     "a student web portal, a grading service, and an exam proctoring module.",
     (("Grade records", "Official course results.", "high"),
      ("Exam content", "Unreleased examination papers.", "high"),
      ("Student portal", "web", "authenticated"),
      ("Grade tampering", "Unauthorized grade changes.",
       "tampering", ["T1078"], [], "high"),
      ("Exam leakage", "Early disclosure of exam papers.",
       "information_disclosure", ["T1078"], [], "medium"))),
    ("ex10-city-water", ["utilities", "ot", "scada"], "complex",
     "Generate a threat model for a municipal water treatment control system.",
     "Municipal Water Treatment Control System",
     "A municipal plant runs chemical dosing and pumping under SCADA "
     "supervision, with remote vendor maintenance access.",
     (("Dosing setpoints", "Chemical treatment parameters.", "critical"),
      ("SCADA historian", "Process telemetry archive.", "medium"),
      ("Vendor remote access", "network_port", "authenticated"),
      ("Setpoint manipulation", "Unsafe chemical dosing changes.",
       "tampering", ["T1565"], [], "critical"),
      ("Maintenance backdoor", "Compromised vendor credentials reused.",
       "spoofing", ["T1078"], ["CVE-2018-13379"], "high"))),
    ("ex11-parcel-lockers", ["retail", "iot", "logistics"], "compound",
     "Generate a threat model for a parcel locker network. The main "
     "components include street locker terminals, a reservation server, and "
     "a courier mobile application.",
     "Parcel Locker Network",
     "Couriers deposit parcels into street lockers for customer pickup. The "
     "main components include locker terminals, a reservation server, and a "
     "courier mobile application.",
     (("Locker access codes", "One-time pickup codes.", "medium"),
      ("Reservation server", "Allocates compartments.", "high"),
      ("Locker terminal", "physical", "public"),
      ("Code brute force", "Guessing pickup codes at the terminal.",
       "spoofing", ["T1110"], [], "medium"),
      ("Terminal tampering", "Physical compromise of locker controllers.",
       "tampering", ["T1068"], [], "high"))),
    ("ex12-saas-crm", ["cloud", "saas", "web"], "simple",
     "Generate a threat model for a multi-tenant CRM platform where sales "
     "teams manage contacts through a web application connected to an API "
     "backend, and tenant data is processed through a shared database.",
     "Multi-Tenant SaaS CRM",
     "Sales teams manage customer contacts through a web application "
     "connected to an API backend; tenant data is processed through a shared "
     "database and usage is continuously monitored.",
     (("Tenant contact data", "Customer lists for all tenants.", "high"),
      ("API backend", "Business logic and tenant isolation.", "critical"),
      ("Public REST API", "api", "public"),
      ("Tenant isolation bypass", "Cross-tenant data access via the API.",
       "elevation_of_privilege", ["T1190"], ["CVE-2022-22965"], "critical"),
      ("Contact list scraping", "Bulk export of tenant data.",
       "information_disclosure", ["T1078"], [], "high"))),
]


def write_corpus():
    CORPUS.mkdir(parents=True, exist_ok=True)
    for (example_id, tags, complexity, prompt, title, narrative,
         bits) in CORPUS_EXAMPLES:
        doc = small_model(example_id, title, narrative, tags, bits)
        (CORPUS / f"{example_id}.model.json").write_text(
            render(doc), encoding="utf-8")
        meta = {"domain_tags": tags, "complexity": complexity,
                "prompt_text": prompt}
        (CORPUS / f"{example_id}.meta.json").write_text(
            json.dumps(meta, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")


if __name__ == "__main__":
    write_scripts()
    write_prompts()
    write_corpus()
    print("fixtures written")
