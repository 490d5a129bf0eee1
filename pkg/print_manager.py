"""
Print Manager Module
Handles PDF generation of run summaries
"""
import io
from datetime import datetime

from reportlab.lib import colors
from reportlab.lib.colors import HexColor
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from utils import format_datetime, format_residual


class PrintManager:
    """Manager for PDF generation"""

    def __init__(self, config):
        """Initialize print manager with configuration"""
        self.config = config
        self.styles = getSampleStyleSheet()
        self._create_custom_styles()

    def _create_custom_styles(self):
        """Create custom paragraph styles"""
        # Title style
        self.styles.add(ParagraphStyle(
            name='CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=20,
            textColor=HexColor('#1f77b4'),
            spaceAfter=24,
            alignment=TA_CENTER
        ))

        # Subtitle style
        self.styles.add(ParagraphStyle(
            name='CustomSubtitle',
            parent=self.styles['Heading2'],
            fontSize=14,
            textColor=HexColor('#333333'),
            spaceAfter=12,
            spaceBefore=12
        ))

        # Section header style
        self.styles.add(ParagraphStyle(
            name='SectionHeader',
            parent=self.styles['Heading3'],
            fontSize=12,
            textColor=HexColor('#1f77b4'),
            spaceAfter=8,
            spaceBefore=12,
            backColor=HexColor('#f0f2f6')
        ))

        # Info text style
        self.styles.add(ParagraphStyle(
            name='InfoText',
            parent=self.styles['Normal'],
            fontSize=9,
            textColor=HexColor('#666666'),
            spaceAfter=6
        ))

    @staticmethod
    def _label_table(rows):
        table = Table(rows, colWidths=[2 * inch, 4.5 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (0, -1), colors.lightgrey),
            ('TEXTCOLOR', (0, 0), (-1, -1), colors.black),
            ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('FONTNAME', (1, 0), (1, -1), 'Helvetica'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('GRID', (0, 0), (-1, -1), 1, colors.grey),
            ('VALIGN', (0, 0), (-1, -1), 'TOP'),
        ]))
        return table

    def _checks_table(self, checks):
        rows = [['Check', 'Sup residual', 'Tolerance', 'Order', 'Result']]
        for c in checks:
            order = f"{c.convergence_order:.2f}" if c.convergence_order is not None else 'N/A'
            rows.append([c.identity_id, format_residual(c.sup_residual), format_residual(c.tolerance), order,
                         'PASS' if c.passed else 'FAIL'])
        table = Table(rows, colWidths=[2 * inch, 1.2 * inch, 1.2 * inch, 0.8 * inch, 0.8 * inch])
        style = [
            ('BACKGROUND', (0, 0), (-1, 0), HexColor('#1f77b4')),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('GRID', (0, 0), (-1, -1), 1, colors.grey),
            ('ALIGN', (1, 1), (-1, -1), 'RIGHT'),
        ]
        for row, c in enumerate(checks, start=1):
            if not c.passed:
                style.append(('TEXTCOLOR', (-1, row), (-1, row), colors.red))
        table.setStyle(TableStyle(style))
        return table

    def generate_run_pdf(self, report, generated: datetime = None):
        """
        Generate a PDF summary of a run report

        Args:
            report: RunReport from the scenario runner
            generated: Timestamp printed in the footer, defaults to now

        Returns:
            BytesIO: PDF file in memory
        """
        buffer = io.BytesIO()
        doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=0.5 * inch, bottomMargin=0.5 * inch)
        story = []
        scenario = report.scenario

        story.append(Paragraph(self.config.APP_TITLE, self.styles['CustomTitle']))
        story.append(Paragraph("VERIFICATION RUN", self.styles['CustomSubtitle']))

        story.append(Paragraph("Scenario", self.styles['SectionHeader']))
        story.append(self._label_table([
            ['Name:', scenario.get('name') or 'N/A'],
            ['Seed:', str(scenario.get('seed'))],
            ['Model:', str(scenario.get('model', {}).get('name', 'N/A'))],
            ['Density:', str(scenario.get('density', {}).get('preset', 'N/A'))],
            ['Tool version:', report.version],
            ['Result:', 'PASS' if report.passed else 'FAIL'],
        ]))
        story.append(Spacer(1, 0.2 * inch))

        if report.checks:
            story.append(Paragraph("Checks", self.styles['SectionHeader']))
            story.append(self._checks_table(report.checks))
            story.append(Spacer(1, 0.2 * inch))
            messages = [c for c in report.checks if c.message]
            for c in messages:
                story.append(Paragraph(f"{c.identity_id}: {c.message}", self.styles['InfoText']))

        if report.solver is not None:
            solver = report.solver
            story.append(Paragraph("Solver", self.styles['SectionHeader']))
            rows = [
                ['Task:', str(solver.get('task'))],
                ['Basis:', str(solver.get('basis'))],
                ['Result:', 'PASS' if solver.get('pass', True) else 'FAIL'],
            ]
            if solver.get('eigenvalues') is not None:
                rows.append(['Eigenvalues:', ", ".join(format_residual(s) for s in solver['eigenvalues'])])
            if solver.get('kernel_dim') is not None:
                rows.append(['Kernel dimension:', str(solver['kernel_dim'])])
            if solver.get('min_singular_value') is not None:
                rows.append(['Min singular value:', format_residual(solver['min_singular_value'])])
            if solver.get('message'):
                rows.append(['Message:', solver['message']])
            story.append(self._label_table(rows))

        if report.numeric_failure:
            story.append(Spacer(1, 0.2 * inch))
            story.append(Paragraph(f"Numeric failure: {report.numeric_failure}", self.styles['InfoText']))

        story.append(Spacer(1, 0.3 * inch))
        story.append(Paragraph(f"Generated: {format_datetime(generated or datetime.now())}", self.styles['InfoText']))

        doc.build(story)
        buffer.seek(0)
        return buffer
